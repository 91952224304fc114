// SPDX-License-Identifier: Apache-2.0

#include "uncertainty.hpp"

#include <algorithm>

#include <cmath>
#include <stdexcept>

#include "text.hpp"

namespace picl {

EntropyResult entropy_of(std::span<const double> logprobs) {
    if (logprobs.empty()) throw std::invalid_argument("no distribution");
    // Summing in sorted order makes the result independent of input order.
    std::vector<double> sorted(logprobs.begin(), logprobs.end());
    for (double lp : sorted)
        if (std::isnan(lp) || lp > 0.0) throw std::invalid_argument("invalid distribution: logprob > 0");
    std::sort(sorted.begin(), sorted.end());
    double mass = 0.0;
    double h = 0.0;
    for (double lp : sorted) {
        const double p = std::exp(lp);
        mass += p;
        if (p > 0.0) h -= p * lp;
    }
    if (mass > 1.0 + k_tail_tolerance) throw std::invalid_argument("invalid distribution: mass > 1");
    EntropyResult out;
    out.buckets = logprobs.size();
    const double tail = 1.0 - mass;
    if (tail > k_tail_tolerance) {
        h -= tail * std::log(tail);
        out.buckets += 1;
        out.truncated = true;
    }
    out.nats = h < 0.0 ? 0.0 : h;
    return out;
}

std::optional<EntropyResult> event_entropy(const TokenEvent& event) {
    if (!event.has_distribution()) return std::nullopt;
    std::vector<double> lps;
    lps.reserve(event.top_alternatives.size());
    for (const auto& a : event.top_alternatives) lps.push_back(a.logprob);
    return entropy_of(lps);
}

std::optional<InterruptMatch> detect_interrupt(const TokenEvent& event, std::span<const std::string> vocab,
                                               std::string_view decoded_tail) {
    // Only words whose last character lies inside this event's text count;
    // earlier text has already been scanned.
    const std::size_t event_start =
        decoded_tail.size() >= event.text.size() ? decoded_tail.size() - event.text.size() : 0;
    const std::string lowered = to_lower(decoded_tail);
    std::optional<InterruptMatch> best;
    for (const auto& entry : vocab) {
        const std::string needle = to_lower(trim(entry));
        if (needle.empty()) continue;
        for (auto pos = lowered.find(needle); pos != std::string::npos; pos = lowered.find(needle, pos + 1)) {
            const std::size_t last = pos + needle.size() - 1;
            if (last < event_start) continue;
            if (pos > 0 && is_word_char(lowered[pos - 1])) continue;
            if (last + 1 < lowered.size() && is_word_char(lowered[last + 1])) continue;
            if (!best || last < best->offset + best->word.size() - 1 ||
                (last == best->offset + best->word.size() - 1 && pos < best->offset))
                best = InterruptMatch{std::string(decoded_tail.substr(pos, needle.size())), entry, pos};
            break;
        }
    }
    return best;
}

EntropyProfile entropy_profile(std::span<const TokenEvent> events) {
    EntropyProfile profile;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto h = event_entropy(events[i]);
        if (!h) {
            ++profile.skipped;
            continue;
        }
        profile.readings.push_back(EntropyReading{i, h->nats, h->buckets, h->truncated});
    }
    return profile;
}

}  // namespace picl
