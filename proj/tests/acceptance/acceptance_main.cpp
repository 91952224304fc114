// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// non-zero when any gating criterion fails. Criterion 10 talks to a live
// OpenAI-compatible server and only runs when PICL_LIVE_URL is set.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "answer.hpp"
#include "harness.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "uncertainty.hpp"

using namespace picl;

namespace {

/// Collects the first few failure messages of one criterion.
class Check {
public:
    void expect(bool ok, const std::string& what) {
        if (ok) return;
        if (failures_++ < 5) messages_.push_back(what);
    }
    bool ok() const { return failures_ == 0; }
    std::string detail() const {
        std::string out;
        for (const auto& m : messages_) out += "\n      " + m;
        if (failures_ > messages_.size()) out += "\n      (" + std::to_string(failures_ - messages_.size()) + " more)";
        return out;
    }

private:
    std::size_t failures_ = 0;
    std::vector<std::string> messages_;
};

bool report(int n, const std::string& title, const std::function<std::string(Check&)>& body) {
    Check c;
    std::string summary;
    try {
        summary = body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    std::printf("[%s] %d: %s%s%s%s\n", c.ok() ? "PASS" : "FAIL", n, title.c_str(), summary.empty() ? "" : " (",
                summary.c_str(), summary.empty() ? "" : ")");
    if (!c.ok()) std::printf("    failures:%s\n", c.detail().c_str());
    std::fflush(stdout);
    return c.ok();
}

std::size_t words(const std::string& s) {
    std::istringstream in(s);
    std::size_t n = 0;
    for (std::string w; in >> w;) ++n;
    return n;
}

std::size_t recount_inserted(const GenerationTranscript& t) {
    std::size_t n = 0;
    for (const auto& s : t.segments)
        if (const auto* d = std::get_if<InsertedDemos>(&s)) n += static_cast<std::size_t>(std::llround(words(d->text) * 1.3));
    return n;
}

class RecordingBackend : public Backend {
public:
    explicit RecordingBackend(const json& script) : mock(parse_mock_script(script)) {}
    std::unique_ptr<TokenStream> stream_generate(const BackendRequest& r) override {
        prompts.push_back(r.prompt);
        return mock.stream_generate(r);
    }
    std::string complete(const std::string& p, const CompletionOptions& o) override { return mock.complete(p, o); }

    MockBackend mock;
    std::vector<std::string> prompts;
};

// ---------------------------------------------------------------------------
// Random mock scripts
// ---------------------------------------------------------------------------

const std::vector<std::string> k_words{" we", " add", " the", " terms", " so", " then", ",", ".", " 7", " x",
                                       " wait", " Wait", " maybe", " Maybe", " hmm", " zeta", " (wait)"};

json random_step(std::mt19937_64& rng, const std::string& text) {
    if (rng() % 5 == 0) return text;
    std::uniform_real_distribution<double> u(0.05, 0.95);
    const double p = u(rng);
    return json::array({text, json::array({json::array({text, std::log(p)}), json::array({" other", std::log(1.0 - p)})})});
}

json random_steps(std::mt19937_64& rng) {
    json steps = json::array();
    const int n = 5 + static_cast<int>(rng() % 36);
    for (int i = 0; i < n; ++i) {
        if (rng() % 12 == 0) {
            steps.push_back(random_step(rng, " Wa"));
            steps.push_back(random_step(rng, "it"));
        } else {
            steps.push_back(random_step(rng, k_words[rng() % k_words.size()]));
        }
    }
    if (rng() % 2) steps.push_back(" \\boxed{" + std::to_string(rng() % 100) + "}");
    return steps;
}

std::string random_verdict(std::mt19937_64& rng) {
    switch (rng() % 4) {
        case 0: return "No";
        case 1: return "Yes.";
        default: return "Yes. confusion{how to combine the terms}";
    }
}

std::vector<Demonstration> random_pool(std::mt19937_64& rng, std::size_t n) {
    static const std::vector<std::string> bank{"add", "terms", "percent", "discount", "price", "area", "circle",
                                               "angle", "prime", "sum", "digits", "ratio", "speed", "time"};
    std::vector<Demonstration> pool;
    for (std::size_t i = 0; i < n; ++i) {
        std::string problem = "Example";
        std::string solution = "Use";
        for (int w = 0; w < 6; ++w) problem += " " + bank[rng() % bank.size()];
        for (int w = 0; w < 4; ++w) solution += " " + bank[rng() % bank.size()];
        solution += ". \\boxed{" + std::to_string(i) + "}";
        pool.push_back({"r" + std::to_string(i), problem, solution, std::nullopt});
    }
    return pool;
}

const Query k_query{"q", "Combine the terms and add the sum of the digits.", std::nullopt};

// ---------------------------------------------------------------------------

std::string criterion1(Check& c) {
    const auto start = std::chrono::steady_clock::now();
    for (const auto& name : test::controller_fixture_names()) {
        const auto f = test::load_controller_fixture(name);
        test::ScriptedEngine se(f.script, f.pool, f.config);
        const auto t = se.run(f.query, RunMode::picl);
        c.expect(json(t).dump() == f.expected.dump(), name + ": transcript differs from golden");
        c.expect(se.mock->complete_calls() == f.detection_calls, name + ": detection call count");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(secs < 5.0, "took " + std::to_string(secs) + " s");
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu fixtures, %.3f s", test::controller_fixture_names().size(), secs);
    return buf;
}

std::string criterion2(Check& c) {
    std::mt19937_64 rng(20240601);
    const int trials = 600;
    std::size_t insertions_seen = 0;
    for (int trial = 0; trial < trials; ++trial) {
        const json steps = random_steps(rng);
        json responses = json::array();
        responses.push_back({{"match", {"signs of confusion", "zeta"}}, {"response", random_verdict(rng)}});
        json fallback{{"match", "signs of confusion"}, {"response", random_verdict(rng)}};
        if (rng() % 10 == 0) fallback["fail_count"] = -1;
        responses.push_back(fallback);
        const int r = static_cast<int>(rng() % 5);
        const int k = 1 + static_cast<int>(rng() % 3);
        const auto pool = random_pool(rng, rng() % 4 == 0 ? 0 : 1 + rng() % 6);
        const json patch{{"max_interventions", r},
                         {"insertion_count", k},
                         {"retrieval_candidates", 4},
                         {"interruption_tokens", {"wait", "maybe", "hmm"}},
                         {"backend", {{"max_attempts", 1}, {"backoff_ms", 0}}}};
        test::ScriptedEngine se(json{{"steps", steps}, {"responses", responses}}, pool, patch);
        const auto t = se.run(k_query);
        const auto tag = "trial " + std::to_string(trial) + ": ";

        c.expect(se.mock->complete_calls() <= static_cast<std::size_t>(r), tag + "detection calls exceed r");
        c.expect(t.interventions.size() <= static_cast<std::size_t>(r), tag + "interventions exceed r");

        std::string generated;
        std::size_t segments_inserted = 0, demos_inserted = 0;
        for (const auto& s : t.segments) {
            if (const auto* g = std::get_if<GeneratedText>(&s)) generated += g->text;
            if (const auto* d = std::get_if<InsertedDemos>(&s)) {
                ++segments_inserted;
                demos_inserted += d->demo_ids.size();
            }
        }
        std::size_t with_ids = 0;
        for (const auto& rec : t.interventions) {
            const bool should_insert = !rec.summary.empty() && !pool.empty();
            c.expect(rec.inserted_demo_ids.empty() != should_insert, tag + "insertion iff summary non-empty");
            c.expect(rec.inserted_demo_ids.size() <= static_cast<std::size_t>(k), tag + "more than k demos");
            if (!rec.inserted_demo_ids.empty()) ++with_ids;
        }
        c.expect(segments_inserted == with_ids, tag + "inserted segments disagree with records");
        c.expect(demos_inserted <= static_cast<std::size_t>(r * k), tag + "more than r*k demos");
        c.expect(t.token_counts.generated == steps.size(), tag + "stream not fully consumed");
        c.expect(t.render() == t.final_text, tag + "render differs from final_text");
        const auto triggers = oracle::interrupt_count(generated, {"wait", "maybe", "hmm"});
        c.expect(t.interventions.size() == std::min<std::size_t>(triggers, static_cast<std::size_t>(r)),
                 tag + "intervention count is not min(triggers, r)");
        insertions_seen += segments_inserted;
    }
    return std::to_string(trials) + " scripts, " + std::to_string(insertions_seen) + " insertions";
}

std::string criterion3(Check& c) {
    c.expect(shannon_entropy(std::vector<double>{0.0}) == 0.0, "one-hot is not 0");
    for (int n : {2, 4, 16, 100}) {
        const std::vector<double> lps(static_cast<std::size_t>(n), -std::log(static_cast<double>(n)));
        c.expect(std::abs(shannon_entropy(lps) - std::log(static_cast<double>(n))) <= 1e-9,
                 "uniform-" + std::to_string(n));
    }
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = 1 + rng() % 64;
        std::vector<double> p(n);
        for (auto& x : p) x = u(rng) + 1e-12;
        double total = 0.0;
        for (double x : p) total += x;
        total *= trial % 2 == 0 ? 1.0 : 1.0 + u(rng);  // half the draws leave tail mass
        std::vector<double> lps;
        for (double x : p) lps.push_back(std::log(x / total));
        const auto r = entropy_of(lps);
        c.expect(r.nats >= 0.0 && r.nats <= std::log(static_cast<double>(r.buckets)) + 1e-12,
                 "bounds violated in trial " + std::to_string(trial));
        auto shuffled = lps;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        c.expect(entropy_of(shuffled).nats == r.nats, "permutation changed entropy in trial " + std::to_string(trial));
    }
    return "1000 random distributions";
}

std::string criterion4(Check& c) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g;
    const std::size_t dim = 24, size = 1000, n = 20;
    for (int inst = 0; inst < 50; ++inst) {
        std::vector<Demonstration> demos;
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < size; ++i) {
            // Every tenth row repeats an earlier one to force exact ties.
            if (i > 0 && i % 10 == 0) {
                rows.push_back(rows[rng() % i]);
            } else {
                rows.emplace_back(dim);
                for (auto& x : rows.back()) x = g(rng);
            }
            const auto& v = rows.back();
            demos.push_back({"v" + std::to_string(i), "p", "s", v});
        }
        const auto pool = make_pool(std::move(demos));
        std::vector<double> q = rows[rng() % size];
        if (inst % 2) for (auto& x : q) x = g(rng);
        const auto got = rank_by_vector(pool, q, n);
        const auto expected = oracle::exhaustive_scan(pool.embeddings->rows, q, n);
        c.expect(got.size() == expected.size(), "instance " + std::to_string(inst) + ": size");
        for (std::size_t i = 0; i < std::min(got.size(), expected.size()); ++i) {
            c.expect(got[i].pool_index == expected[i].index,
                     "instance " + std::to_string(inst) + ": rank " + std::to_string(i));
            c.expect(std::abs(got[i].phase1_score - expected[i].score) <= 1e-12,
                     "instance " + std::to_string(inst) + ": score " + std::to_string(i));
        }
    }

    std::vector<std::string> docs;
    const auto demos = random_pool(rng, 20);
    for (const auto& d : demos) docs.push_back(d.problem);
    const auto pool = make_pool(demos);
    for (const std::string query : {"percent discount price", "circle area", "prime digits sum sum", "speed"}) {
        const auto got = bm25_retrieve(pool, query, 20);
        const auto expected = oracle::bm25(docs, query);
        for (std::size_t i = 0; i < expected.size(); ++i) {
            c.expect(got[i].pool_index == expected[i].index, "bm25 order for '" + query + "'");
            c.expect(std::abs(got[i].phase1_score - expected[i].score) <= 1e-9, "bm25 score for '" + query + "'");
        }
    }
    return "50 pools of 1000, 4 BM25 queries over 20 docs";
}

std::string criterion5(Check& c) {
    std::mt19937_64 rng(5);
    static const std::vector<std::string> summaries{"how to apply a percent discount", "the area of a circle",
                                                    "whether the sum of digits is prime", "speed and time ratio"};
    for (int inst = 0; inst < 100; ++inst) {
        auto pool = make_pool(random_pool(rng, 40 + rng() % 40));
        const LexicalEmbedder embedder(pool.index_texts());
        embed_pool(pool, embedder, std::nullopt);
        const std::size_t n = 5 + rng() % 10, k = 1 + rng() % 6;
        const Query q{"q", random_pool(rng, 1)[0].problem, std::nullopt};
        const ConfusionSummary summary{summaries[rng() % summaries.size()]};
        const auto phase1 = retrieve_candidates(pool, q, n, embedder);
        std::set<std::string> ids;
        for (const auto& p : phase1) ids.insert(p.demo_id);
        const LexicalReranker reranker(pool);
        const auto first = rerank(phase1, pool, q, summary, k, reranker);
        const auto second = rerank(phase1, pool, q, summary, k, LexicalReranker(pool));
        const auto tag = "instance " + std::to_string(inst) + ": ";
        c.expect(first.top.size() == std::min(k, phase1.size()), tag + "wrong top-k size");
        for (const auto& t : first.top) c.expect(ids.count(t.demo_id) == 1, tag + t.demo_id + " not in phase-1 top-N");
        c.expect(first.top == second.top, tag + "repeated rerank differs");
    }
    return "100 instances";
}

std::string criterion6(Check& c) {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 20; ++i) {
        const json script{{"steps", random_steps(rng)},
                          {"responses", {{{"match", "signs of confusion"}, {"response", random_verdict(rng)}}}}};
        const auto pool = random_pool(rng, 5);
        const json patch{{"max_interventions", 0}, {"interruption_tokens", {"wait", "maybe", "hmm"}}};
        test::ScriptedEngine a(script, pool, patch), b(script, pool, patch);
        const auto picl = a.run(k_query, RunMode::picl);
        const auto zero = b.run(k_query, RunMode::zero_shot);
        c.expect(picl.final_text == zero.final_text, "fixture " + std::to_string(i) + ": final_text differs");
        c.expect(a.mock->complete_calls() == 0, "fixture " + std::to_string(i) + ": detection ran with r=0");
    }
    for (int i = 0; i < 10; ++i) {
        auto backend = std::make_shared<RecordingBackend>(json{{"steps", {" \\boxed{1}"}}});
        Engine engine(merge_config(EngineConfig{}, json{{"static_shot_count", 1}, {"selector", i % 2 ? "bm25" : "similarity"}}),
                      backend);
        engine.set_pool(make_pool(random_pool(rng, 4 + i)));
        const Query q{"s" + std::to_string(i), random_pool(rng, 1)[0].problem, std::nullopt};
        const auto ctx = engine.context(engine.config());
        const auto picks = select_static_demos(ctx, q);
        run_query(ctx, q, RunMode::static_icl);
        const auto& d = engine.pool()->demos.at(picks.at(0));
        std::string expected = engine.templates().few_shot;
        const std::string demo = "Problem: " + d.problem + "\nSolution: " + d.solution + "\n\n";
        expected.replace(expected.find("{{DEMOS}}"), 9, demo);
        expected.replace(expected.find("{{QUERY}}"), 9, q.text);
        c.expect(backend->prompts.size() == 1 && backend->prompts[0] == expected,
                 "static fixture " + std::to_string(i) + ": prompt layout");
    }
    return "20 r=0 fixtures, 10 static prompts";
}

std::string criterion7(Check& c) {
    const auto cases = json::parse(read_file(test::fixture_path("boxed_cases.json")));
    for (const auto& k : cases) {
        const auto text = k.at("text").get<std::string>();
        const auto got = extract_answer(text);
        c.expect(got == oracle::boxed(text), "oracle disagreement on: " + text);
        const auto expected = k.at("expected").is_null() ? std::nullopt
                                                         : std::optional<std::string>(k.at("expected").get<std::string>());
        c.expect(got == expected, "fixture disagreement on: " + text);
    }
    return std::to_string(cases.size()) + " cases";
}

std::string criterion8(Check& c) {
    const auto syn = test::synthetic_benchmark(50);
    test::ScriptedEngine se(syn.script, syn.pool);
    const std::vector<RunMode> modes{RunMode::zero_shot, RunMode::static_icl, RunMode::picl};
    const auto base = evaluate(*se.engine, se.engine->config(), syn.dataset, modes, 1);
    const auto base_json = report_to_json(base).dump();
    for (int w : {4, 8}) {
        const auto other = evaluate(*se.engine, se.engine->config(), syn.dataset, modes, w);
        c.expect(report_to_json(other).dump() == base_json, "report differs with " + std::to_string(w) + " workers");
        c.expect(other.transcripts == base.transcripts, "transcripts differ with " + std::to_string(w) + " workers");
    }
    std::map<std::string, std::size_t> recount;
    std::map<std::string, std::string> gold;
    for (const auto& q : syn.dataset.items) gold[q.id] = *q.gold_answer;
    for (const auto& t : base.transcripts) {
        const auto boxed = oracle::boxed(t.final_text);
        if (boxed && *boxed == gold[t.query_id]) ++recount[t.mode];
    }
    for (const auto& m : base.modes)
        c.expect(m.correct == recount[m.mode], m.mode + ": accuracy differs from recount");

    for (auto param : {SweepParameter::r, SweepParameter::k}) {
        const auto result = sweep(*se.engine, syn.dataset, param, {1, 2, 3, 4}, 4);
        c.expect(result.rows.size() == 4, "sweep row count");
        for (std::size_t i = 0; i < result.rows.size(); ++i) {
            auto cfg = se.engine->config();
            (param == SweepParameter::r ? cfg.max_interventions : cfg.insertion_count) = static_cast<int>(i + 1);
            const auto& s = evaluate(*se.engine, cfg, syn.dataset, {RunMode::picl}, 1).modes[0];
            const SweepRow expected{static_cast<int>(i + 1), s.accuracy, s.avg_total_tokens, s.avg_generated_tokens,
                                    s.avg_inserted_tokens};
            c.expect(result.rows[i] == expected, std::string("sweep ") + (param == SweepParameter::r ? "r" : "k") +
                                                     " row " + std::to_string(i + 1));
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "50 items; accuracy zero_shot %.2f, static %.2f, picl %.2f",
                  base.summary("zero_shot")->accuracy, base.summary("static_icl")->accuracy, base.summary("picl")->accuracy);
    return buf;
}

std::string criterion9(Check& c) {
    std::size_t transcripts = 0;
    for (const auto& name : test::controller_fixture_names()) {
        const auto f = test::load_controller_fixture(name);
        test::ScriptedEngine se(f.script, f.pool, f.config);
        const auto t = se.run(f.query, RunMode::picl);
        c.expect(t.token_counts.generated == f.script.at("steps").size(), name + ": generated count");
        c.expect(t.token_counts.inserted == recount_inserted(t), name + ": inserted count");
        ++transcripts;
    }
    const auto syn = test::synthetic_benchmark(50);
    test::ScriptedEngine se(syn.script, syn.pool);
    const auto report = evaluate(*se.engine, se.engine->config(), syn.dataset,
                                 {RunMode::zero_shot, RunMode::static_icl, RunMode::picl}, 4);
    std::map<std::string, std::pair<std::size_t, std::size_t>> totals;
    for (std::size_t i = 0; i < report.items.size(); ++i) {
        const auto& rec = report.items[i];
        const auto& t = report.transcripts[i];
        const int item = std::stoi(rec.query_id.substr(1));
        c.expect(rec.generated_tokens == (item % 2 == 0 ? 6u : 5u), rec.query_id + "/" + rec.mode + ": generated");
        c.expect(rec.inserted_tokens == recount_inserted(t), rec.query_id + "/" + rec.mode + ": inserted");
        totals[rec.mode].first += rec.generated_tokens;
        totals[rec.mode].second += recount_inserted(t);
        ++transcripts;
    }
    for (const auto& m : report.modes) {
        c.expect(m.generated_tokens == totals[m.mode].first, m.mode + ": generated total drift");
        c.expect(m.inserted_tokens == totals[m.mode].second, m.mode + ": inserted total drift");
        c.expect(m.avg_total_tokens == static_cast<double>(totals[m.mode].first + totals[m.mode].second) / 50.0,
                 m.mode + ": average total");
    }
    return std::to_string(transcripts) + " transcripts";
}

/// Returns nullopt when skipped.
std::optional<bool> criterion10() {
    const char* url = std::getenv("PICL_LIVE_URL");
    if (!url || !*url) {
        std::printf("[SKIP] 10: live-backend smoke test (set PICL_LIVE_URL and PICL_LIVE_MODEL to run; not gating)\n");
        return std::nullopt;
    }
    const char* model = std::getenv("PICL_LIVE_MODEL");
    return report(10, "live-backend smoke test (not gating)", [&](Check& c) {
        EngineConfig cfg;
        cfg.backend.kind = "openai";
        cfg.backend.url = url;
        cfg.backend.model = model ? model : "";
        cfg.max_tokens = 256;
        cfg.top_logprobs = 5;
        Engine engine(cfg);
        engine.set_pool(make_pool({{"d1", "What is 15% of 80?", "0.15 * 80 = 12. \\boxed{12}", std::nullopt},
                                   {"d2", "What is 2 + 2?", "\\boxed{4}", std::nullopt}}));
        const Query q{"live", "What is 20% of 50?", std::string("10")};
        const auto t = engine.run(q);
        c.expect(!t.failed, "run failed: " + (t.warnings.empty() ? std::string() : t.warnings[0]));
        c.expect(json::parse(json(t).dump()).get<GenerationTranscript>() == t, "transcript does not round-trip");
        Dataset ds;
        ds.items = {q};
        const auto e = export_entropy(engine, ds);
        c.expect(!e.rows.empty(), "entropy export is empty");
        return std::to_string(t.token_counts.generated) + " tokens, " + std::to_string(e.rows.size()) + " entropy rows";
    });
}

}  // namespace

int main() {
    bool ok = true;
    ok &= report(1, "golden transcripts", criterion1);
    ok &= report(2, "budget and gate invariants", criterion2);
    ok &= report(3, "entropy correctness", criterion3);
    ok &= report(4, "retrieval oracle equivalence", criterion4);
    ok &= report(5, "rerank containment and determinism", criterion5);
    ok &= report(6, "mode equivalence", criterion6);
    ok &= report(7, "answer extraction", criterion7);
    ok &= report(8, "harness reproducibility", criterion8);
    ok &= report(9, "token accounting", criterion9);
    criterion10();
    return ok ? 0 : 1;
}
