// Copyright (c) 2026 the horizon authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "horizon/compiler.hpp"
#include "horizon/errors.hpp"
#include "horizon/evaluator.hpp"
#include "horizon/expression.hpp"
#include "horizon/pricing.hpp"
#include "horizon/scorecard.hpp"
#include "horizon/service.hpp"
#include "horizon/signing.hpp"
#include "horizon/store.hpp"
#include "horizon/value.hpp"
