// Copyright (c) 2026 the horizon authors
// SPDX-License-Identifier: Apache-2.0
//
// Integrity-protected evaluation results: HMAC-SHA256 over the canonical
// JSON (UTF-8, sorted keys, no insignificant whitespace) of the token body.

#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "horizon/digest.hpp"
#include "horizon/errors.hpp"

namespace horizon {

inline constexpr std::int64_t kClockSkewMs = 30'000; // verification tolerance
inline constexpr const char* kSigningAlgorithm = "HMAC-SHA256";

struct SignedEvaluation {
    nlohmann::json payload; // an EvaluationResult or BootstrapPayload document
    std::string subject;    // user identifier the evaluation was issued for
    std::string pricingVersion;
    std::int64_t issuedAt = 0;  // epoch milliseconds
    std::int64_t expiresAt = 0; // epoch milliseconds
    std::string algorithm = kSigningAlgorithm;
    std::string signature; // lowercase hex

    nlohmann::json to_json() const {
        return {{"payload", payload},
                {"subject", subject},
                {"pricingVersion", pricingVersion},
                {"issuedAt", issuedAt},
                {"expiresAt", expiresAt},
                {"algorithm", algorithm},
                {"signature", signature}};
    }

    static SignedEvaluation from_json(const nlohmann::json& j) {
        if (!j.is_object())
            throw Error(Errc::SignatureInvalid, "token must be a JSON object");
        SignedEvaluation t;
        try {
            t.payload = j.at("payload");
            t.subject = j.at("subject").get<std::string>();
            t.pricingVersion = j.at("pricingVersion").get<std::string>();
            t.issuedAt = j.at("issuedAt").get<std::int64_t>();
            t.expiresAt = j.at("expiresAt").get<std::int64_t>();
            t.algorithm = j.at("algorithm").get<std::string>();
            t.signature = j.at("signature").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::SignatureInvalid, std::string("malformed token: ") + e.what());
        }
        return t;
    }
};

/// Canonical byte string covered by the signature: every field except the
/// signature itself, in nlohmann's sorted-key compact form.
inline std::string signing_material(const SignedEvaluation& t) {
    nlohmann::json j{{"payload", t.payload},
                     {"subject", t.subject},
                     {"pricingVersion", t.pricingVersion},
                     {"issuedAt", t.issuedAt},
                     {"expiresAt", t.expiresAt},
                     {"algorithm", t.algorithm}};
    return j.dump();
}

inline std::int64_t epoch_ms_now() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

inline SignedEvaluation sign_result(nlohmann::json payload, std::string subject,
                                    std::string pricingVersion, const std::string& secret,
                                    std::int64_t ttlMs = 300'000,
                                    std::int64_t nowMs = epoch_ms_now()) {
    if (secret.empty())
        throw Error(Errc::ConfigError, "signing secret must not be empty");
    SignedEvaluation t;
    t.payload = std::move(payload);
    t.subject = std::move(subject);
    t.pricingVersion = std::move(pricingVersion);
    t.issuedAt = nowMs;
    t.expiresAt = nowMs + ttlMs;
    t.signature = hmac_sha256_hex(secret, signing_material(t));
    return t;
}

/// Returns the embedded payload iff the signature verifies and the token is
/// not expired beyond the 30s clock-skew tolerance.
inline nlohmann::json verify_token(const nlohmann::json& token, const std::string& secret,
                                   std::int64_t nowMs = epoch_ms_now()) {
    if (secret.empty())
        throw Error(Errc::ConfigError, "signing secret must not be empty");
    SignedEvaluation t = SignedEvaluation::from_json(token);
    if (t.algorithm != kSigningAlgorithm)
        throw Error(Errc::SignatureInvalid, "unsupported algorithm '" + t.algorithm + "'");
    std::string expected = hmac_sha256_hex(secret, signing_material(t));
    if (!digest_equal(expected, t.signature))
        throw Error(Errc::SignatureInvalid, "signature does not match token contents");
    if (nowMs > t.expiresAt + kClockSkewMs)
        throw Error(Errc::TokenExpired, "token expired at " + std::to_string(t.expiresAt));
    return t.payload;
}

} // namespace horizon
