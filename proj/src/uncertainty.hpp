// SPDX-License-Identifier: Apache-2.0

// Per-step uncertainty: Shannon entropy over the top alternatives a backend
// reports, and interruption-word detection on the decoded stream.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"

namespace picl {

/// Mass not covered by the reported alternatives is folded into one tail
/// bucket once it exceeds this.
inline constexpr double k_tail_tolerance = 1e-6;

struct EntropyResult {
    double nats = 0.0;
    std::size_t buckets = 0;  // alternatives used, plus one if the tail was folded
    bool truncated = false;
};

/// -sum p ln p over exp(logprobs), with any residual mass as one extra
/// bucket. Throws std::invalid_argument for an empty list, a positive
/// logprob or total mass above 1 + 1e-6.
EntropyResult entropy_of(std::span<const double> logprobs);

inline double shannon_entropy(std::span<const double> logprobs) { return entropy_of(logprobs).nats; }

struct InterruptMatch {
    std::string word;      // surface form as it appears in the text
    std::string vocab;     // the vocabulary entry that matched
    std::size_t offset = 0;  // byte offset of the match in the tail
};

/// Fires when the decoded tail, which ends with `event`'s text, contains a
/// vocabulary entry as a whole word (case-insensitive, punctuation ignored)
/// whose last character came from this event. A word spread over several
/// tokens fires once, at the token that completes it. The earliest-ending
/// match wins.
std::optional<InterruptMatch> detect_interrupt(const TokenEvent& event, std::span<const std::string> vocab,
                                               std::string_view decoded_tail);

struct EntropyReading {
    std::size_t position = 0;
    double entropy_nats = 0.0;
    std::size_t support_size = 0;
    bool truncated = false;

    bool operator==(const EntropyReading&) const = default;
};

struct EntropyProfile {
    std::vector<EntropyReading> readings;
    std::size_t skipped = 0;  // events without a distribution
};

EntropyProfile entropy_profile(std::span<const TokenEvent> events);

/// Entropy of one event, or nullopt when it carries no distribution.
std::optional<EntropyResult> event_entropy(const TokenEvent& event);

}  // namespace picl
