// SPDX-License-Identifier: Apache-2.0

#include "embedding.hpp"

#include <cmath>
#include <set>

#include "http_util.hpp"
#include "text.hpp"

namespace picl {

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

TfidfModel::TfidfModel(std::span<const std::string> corpus) {
    std::map<std::string, std::size_t> df;
    for (const auto& doc : corpus) {
        const auto terms = tokenize_terms(doc);
        for (const auto& t : std::set<std::string>(terms.begin(), terms.end())) ++df[t];
    }
    const double n = static_cast<double>(corpus.size());
    idf_.reserve(df.size());
    for (const auto& [term, count] : df) {
        vocab_.emplace(term, idf_.size());
        idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
}

Vector TfidfModel::vectorize(std::string_view text) const {
    Vector v(idf_.size(), 0.0);
    for (const auto& t : tokenize_terms(text)) {
        if (auto it = vocab_.find(t); it != vocab_.end()) v[it->second] += 1.0;
    }
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= idf_[i];
    const double norm = l2_norm(v);
    if (norm > 0.0)
        for (auto& x : v) x /= norm;
    return v;
}

std::vector<Vector> LexicalEmbedder::embed(std::span<const std::string> texts) const {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(model_.vectorize(t));
    return out;
}

ApiEmbedder::ApiEmbedder(std::string url, std::string model, std::string api_key, int timeout_s, RetryPolicy retry)
    : endpoint_(parse_endpoint(url)), model_(std::move(model)), api_key_(std::move(api_key)),
      timeout_s_(timeout_s), retry_(retry) {}

std::vector<Vector> ApiEmbedder::embed(std::span<const std::string> texts) const {
    if (texts.empty()) return {};
    json body{{"input", std::vector<std::string>(texts.begin(), texts.end())}};
    if (!model_.empty()) body["model"] = model_;
    const auto res = call_with_retry(retry_, [&] { return post_json(endpoint_, api_key_, body, timeout_s_); });
    std::vector<Vector> out(texts.size());
    std::vector<bool> filled(texts.size(), false);
    try {
        const auto& data = res.at("data");
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& item = data.at(i);
            const std::size_t idx = item.value("index", i);
            if (idx >= out.size()) throw BackendError("embedding index out of range", false);
            out[idx] = item.at("embedding").get<Vector>();
            filled[idx] = true;
        }
    } catch (const json::exception& e) {
        throw BackendError(std::string("malformed embedding response: ") + e.what(), false);
    }
    for (std::size_t i = 0; i < filled.size(); ++i)
        if (!filled[i]) throw BackendError("embedding response missing item " + std::to_string(i), false);
    return out;
}

}  // namespace picl
