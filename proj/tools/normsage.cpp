// normsage command-line interface.
//
// Exit codes: 0 success, 1 configuration error, 2 backend failure,
// 3 request budget exhausted, 4 KB audit found near-duplicates.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "normsage/normsage.hpp"

namespace {

using namespace normsage;

enum Exit { kOk = 0, kConfig = 1, kBackend = 2, kBudget = 3, kAuditFailed = 4 };

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct BackendOptions {
    std::string url;
    std::string scripted;
    std::string model = "davinci-002";
    std::string embedding_model = "text-embedding-3-small";
    std::string embedder = "auto";
    std::size_t embed_dim = 256;
    int max_in_flight = 4;

    void add_to(CLI::App* cmd) {
        auto* url_opt = cmd->add_option("--backend-url", url, "OpenAI-compatible base URL (key from NORMSAGE_API_KEY)");
        auto* scripted_opt = cmd->add_option("--scripted", scripted, "scripted completion fixture (JSON)");
        url_opt->excludes(scripted_opt);
        cmd->add_option("--model", model, "completion model name");
        cmd->add_option("--embedding-model", embedding_model, "embedding model name");
        cmd->add_option("--embedder", embedder, "auto|local|remote")->check(CLI::IsMember({"auto", "local", "remote"}));
        cmd->add_option("--embed-dim", embed_dim, "dimension of the local hashed embedder");
        cmd->add_option("--max-in-flight", max_in_flight, "bounded concurrent remote requests");
    }
};

struct Backends {
    std::unique_ptr<ScriptedBackend> scripted;
    std::unique_ptr<OpenAIClient> remote;
    std::unique_ptr<HashedTrigramEmbedder> local;

    CompletionBackend& completion() {
        if (scripted) return *scripted;
        return *remote;
    }
    EmbeddingBackend& embedding() {
        if (local) return *local;
        return *remote;
    }
};

Backends make_backends(const BackendOptions& o, bool need_embedder) {
    Backends b;
    if (!o.scripted.empty()) {
        b.scripted = std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(o.scripted));
    } else if (!o.url.empty()) {
        auto cfg = RemoteConfig::from_env(o.url);
        cfg.completion_model = o.model;
        cfg.embedding_model = o.embedding_model;
        cfg.max_in_flight = o.max_in_flight;
        b.remote = std::make_unique<OpenAIClient>(cfg);
    } else {
        throw ConfigError("one of --backend-url or --scripted is required");
    }
    if (need_embedder) {
        bool local = o.embedder == "local" || (o.embedder == "auto" && !b.remote);
        if (local) b.local = std::make_unique<HashedTrigramEmbedder>(o.embed_dim);
        else if (!b.remote) throw ConfigError("--embedder remote requires --backend-url");
    }
    return b;
}

TemplateStore load_templates(const std::string& dir) {
    return dir.empty() ? TemplateStore{} : TemplateStore::from_directory(dir);
}

Clock make_clock(std::optional<long long> fixed_ms) {
    if (!fixed_ms) return system_clock();
    return fixed_clock(std::chrono::system_clock::time_point(std::chrono::milliseconds(*fixed_ms)));
}

struct ThresholdOptions {
    std::string config;
    std::optional<double> theta, gamma, sigma;
    std::optional<std::size_t> k;

    void add_to(CLI::App* cmd, bool with_k) {
        cmd->add_option("--config", config, "JSON config with theta/gamma/sigma/k");
        cmd->add_option("--theta", theta, "correctness threshold (default 0.7)");
        cmd->add_option("--gamma", gamma, "grounding relevance threshold (default 0.6)");
        cmd->add_option("--sigma", sigma, "dedup cosine threshold (default 0.95)");
        if (with_k) cmd->add_option("--k", k, "lines per dialogue chunk (default 5)");
    }

    Thresholds resolve() const {
        Thresholds t = config.empty() ? Thresholds{} : Thresholds::from_file(config);
        if (theta) t.theta = *theta;
        if (gamma) t.gamma = *gamma;
        if (sigma) t.sigma = *sigma;
        if (k) t.k = *k;
        t.validate();
        return t;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"normsage: conversation-grounded norm discovery and verification"};
    app.require_subcommand(1);

    // discover
    auto* discover_cmd = app.add_subcommand("discover", "discover, verify and store norms from a transcript");
    std::string source_file, background_file, kb_path, variant = "base", format = "plain", source_id, title, lang = "en";
    std::string templates_dir, run_log, relevance_mode = "combined";
    std::size_t max_requests = 10000, parallelism = 1;
    std::optional<long long> fixed_time_ms;
    BackendOptions discover_backend;
    ThresholdOptions discover_thresholds;
    discover_cmd->add_option("--source", source_file, "transcript file")->required();
    discover_cmd->add_option("--format", format, "plain|records")->check(CLI::IsMember({"plain", "records"}));
    discover_cmd->add_option("--source-id", source_id, "source identifier (default: file stem)");
    discover_cmd->add_option("--title", title, "source title");
    discover_cmd->add_option("--lang", lang, "declared language code");
    discover_cmd->add_option("--background", background_file, "background summary file");
    discover_cmd->add_option("--variant", variant, "base|framed|culture")->check(CLI::IsMember({"base", "framed", "culture"}));
    discover_cmd->add_option("--kb", kb_path, "knowledge base file")->required();
    discover_cmd->add_option("--templates", templates_dir, "alternate template directory");
    discover_cmd->add_option("--run-log", run_log, "JSON-lines run log");
    discover_cmd->add_option("--max-requests", max_requests, "request budget for the run");
    discover_cmd->add_option("--parallelism", parallelism, "chunks processed concurrently");
    discover_cmd->add_option("--relevance", relevance_mode, "combined|emitted")->check(CLI::IsMember({"combined", "emitted"}));
    discover_cmd->add_option("--fixed-time-ms", fixed_time_ms, "use a fixed clock (Unix ms) for reproducible KB files");
    discover_backend.add_to(discover_cmd);
    discover_thresholds.add_to(discover_cmd, true);

    // ground
    auto* ground_cmd = app.add_subcommand("ground", "check a norm against a dialogue");
    std::string dialogue_file, norm_text, speaker, ground_templates;
    BackendOptions ground_backend;
    ground_cmd->add_option("--dialogue", dialogue_file, "plain transcript file")->required();
    ground_cmd->add_option("--norm", norm_text, "norm text")->required();
    ground_cmd->add_option("--speaker", speaker, "localize the question to one speaker");
    ground_cmd->add_option("--templates", ground_templates, "alternate template directory");
    ground_backend.add_to(ground_cmd);

    // kb
    auto* kb_cmd = app.add_subcommand("kb", "inspect and curate a knowledge base");
    kb_cmd->require_subcommand(1);
    std::string kb_file, export_out, review_id, review_status, reviewer, culture_a, culture_b, kb_templates;
    double kb_sigma = 0.95, kb_gamma = 0.6;
    auto* audit_cmd = kb_cmd->add_subcommand("audit", "report record pairs with cosine >= sigma");
    auto* export_cmd = kb_cmd->add_subcommand("export", "write the compacted record file");
    auto* stats_cmd = kb_cmd->add_subcommand("stats", "summary counts");
    auto* review_cmd = kb_cmd->add_subcommand("review", "accept or reject a norm");
    auto* pairs_cmd = kb_cmd->add_subcommand("pairs", "find contradicting norm pairs across two cultures");
    BackendOptions pairs_backend;
    for (auto* c : {audit_cmd, export_cmd, stats_cmd, review_cmd, pairs_cmd})
        c->add_option("--kb", kb_file, "knowledge base file")->required();
    for (auto* c : {audit_cmd, stats_cmd}) c->add_option("--sigma", kb_sigma, "dedup threshold");
    export_cmd->add_option("--out", export_out, "output file (default stdout)");
    review_cmd->add_option("--id", review_id, "norm id")->required();
    review_cmd->add_option("--status", review_status, "accepted|rejected")
        ->required()
        ->check(CLI::IsMember({"accepted", "rejected"}));
    review_cmd->add_option("--reviewer", reviewer, "reviewer name")->required();
    pairs_cmd->add_option("--culture-a", culture_a)->required();
    pairs_cmd->add_option("--culture-b", culture_b)->required();
    pairs_cmd->add_option("--gamma", kb_gamma, "relevance threshold");
    pairs_cmd->add_option("--templates", kb_templates, "alternate template directory");
    pairs_backend.add_to(pairs_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score grounding or correctness predictions against gold labels");
    std::string task, gold_file, report_file, eval_templates, averaging = "macro";
    bool localized = false;
    BackendOptions eval_backend;
    ThresholdOptions eval_thresholds;
    eval_cmd->add_option("--task", task, "grounding2|grounding3|correctness")
        ->required()
        ->check(CLI::IsMember({"grounding2", "grounding3", "correctness"}));
    eval_cmd->add_option("--gold", gold_file, "gold annotation file")->required();
    eval_cmd->add_flag("--localized", localized, "ask the speaker-localized grounding question");
    eval_cmd->add_option("--report", report_file, "write the report JSON here");
    eval_cmd->add_option("--templates", eval_templates, "alternate template directory");
    eval_cmd->add_option("--auc-average", averaging, "macro|micro (3-class)")->check(CLI::IsMember({"macro", "micro"}));
    eval_backend.add_to(eval_cmd);
    eval_thresholds.add_to(eval_cmd, false);

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "HTTP service over a knowledge base");
    std::string serve_kb, host = "127.0.0.1", serve_templates;
    int port = 8080;
    BackendOptions serve_backend;
    ThresholdOptions serve_thresholds;
    serve_cmd->add_option("--kb", serve_kb, "knowledge base file")->required();
    serve_cmd->add_option("--port", port, "listen port");
    serve_cmd->add_option("--host", host, "listen address");
    serve_cmd->add_option("--templates", serve_templates, "alternate template directory");
    serve_backend.add_to(serve_cmd);
    serve_thresholds.add_to(serve_cmd, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*discover_cmd) {
            auto thresholds = discover_thresholds.resolve();
            auto templates = load_templates(templates_dir);
            auto backends = make_backends(discover_backend, true);
            auto fmt = format == "records" ? TranscriptFormat::records : TranscriptFormat::plain;
            SourceMeta meta;
            meta.source_id = source_id.empty() ? std::filesystem::path(source_file).stem().string() : source_id;
            meta.title = title;
            meta.declared_lang = lang;
            if (!background_file.empty()) meta = attach_background(meta, read_file(background_file));
            auto utts = parse_transcript(read_file(source_file), fmt, meta.source_id, lang);

            RunConfig cfg;
            cfg.thresholds = thresholds;
            cfg.variant = parse_variant(variant);
            cfg.relevance_mode = relevance_mode == "emitted" ? RelevanceMode::emitted_label : RelevanceMode::combined_mass;
            cfg.max_requests = max_requests;
            cfg.parallelism = parallelism;
            cfg.validate();

            auto kb = NormsKB::open(kb_path, make_clock(fixed_time_ms));
            RunLog log = run_log.empty() ? RunLog{} : RunLog{run_log};
            auto report = discover(meta, utts, cfg, {backends.completion(), backends.embedding(), templates, kb, log});
            kb.compact();
            std::cout << nlohmann::json(report).dump(2) << "\n";
            if (report.budget_exhausted) return kBudget;
            if (report.chunk_failures > 0 && report.chunk_failures == report.chunks_processed) return kBackend;
            return kOk;
        }

        if (*ground_cmd) {
            auto templates = load_templates(ground_templates);
            auto backends = make_backends(ground_backend, false);
            auto utts = parse_transcript(read_file(dialogue_file), TranscriptFormat::plain, "cli");
            if (utts.empty()) throw ConfigError("dialogue file is empty");
            auto chunk = chunk_dialogue(utts, utts.size(), "cli").front();
            std::optional<std::string> who = speaker.empty() ? std::nullopt : std::optional(speaker);
            auto check = ground_norm(chunk, norm_text, who, backends.completion(), templates);
            std::cout << nlohmann::json(check).dump(2) << "\n";
            return kOk;
        }

        if (*kb_cmd) {
            auto kb = NormsKB::load(kb_file);
            if (*audit_cmd) {
                auto violations = kb.audit_dedup(kb_sigma);
                nlohmann::json out{{"ok", violations.empty()}, {"records", kb.size()}, {"violations", nlohmann::json::array()}};
                for (const auto& v : violations)
                    out["violations"].push_back({{"a", v.a}, {"b", v.b}, {"similarity", v.similarity}});
                std::cout << out.dump(2) << "\n";
                return violations.empty() ? kOk : kAuditFailed;
            }
            if (*export_cmd) {
                if (export_out.empty()) {
                    std::cout << kb.snapshot_records();
                } else {
                    kb.save(export_out);
                }
                return kOk;
            }
            if (*stats_cmd) {
                auto s = kb.stats(kb_sigma);
                std::cout << nlohmann::json{{"total", s.total},
                                            {"by_review", s.by_review},
                                            {"by_culture", s.by_culture},
                                            {"dedup_audit_ok", s.dedup_audit_ok}}
                                 .dump(2)
                          << "\n";
                return kOk;
            }
            if (*review_cmd) {
                auto journaled = NormsKB::open(kb_file);
                auto r = journaled.set_review(review_id, *parse_review_status(review_status), reviewer);
                journaled.compact();
                std::cout << record_view(r).dump(2) << "\n";
                return kOk;
            }
            if (*pairs_cmd) {
                auto templates = load_templates(kb_templates);
                auto backends = make_backends(pairs_backend, false);
                auto pairs = find_contrastive_pairs(kb, culture_a, culture_b, backends.completion(), templates, kb_gamma);
                std::cout << nlohmann::json{{"items", pairs}}.dump(2) << "\n";
                return kOk;
            }
        }

        if (*eval_cmd) {
            auto thresholds = eval_thresholds.resolve();
            auto templates = load_templates(eval_templates);
            auto backends = make_backends(eval_backend, false);
            auto t = parse_eval_task(task);
            auto examples = load_gold(gold_file, t);
            EvalReport report;
            std::string title;
            if (t == EvalTask::correctness) {
                auto preds = predict_correctness(examples, backends.completion(), templates);
                report = eval_correctness(examples, preds, thresholds.theta);
                title = "correctness";
            } else {
                bool loc = localized && t == EvalTask::grounding3;
                auto preds = predict_grounding(examples, backends.completion(), templates, loc);
                if (t == EvalTask::grounding2) {
                    report = eval_grounding_2class(examples, preds, thresholds.gamma);
                    title = "grounding (2-class)";
                } else {
                    report = eval_grounding_3class(examples, preds, loc,
                                                   averaging == "micro" ? AucAveraging::micro : AucAveraging::macro);
                    title = std::string("grounding (3-class") + (loc ? ", speaker-localized)" : ")");
                }
            }
            std::cout << format_report(report, title);
            if (!report_file.empty()) {
                std::ofstream out(report_file);
                auto j = to_json_report(report);
                j["task"] = task;
                j["localized"] = localized;
                out << j.dump(2) << "\n";
            }
            return kOk;
        }

        if (*serve_cmd) {
            auto thresholds = serve_thresholds.resolve();
            auto templates = load_templates(serve_templates);
            auto backends = make_backends(serve_backend, false);
            auto kb = NormsKB::open(serve_kb);
            KbService service(kb, backends.completion(), templates, thresholds, KbService::token_from_env());
            std::cerr << "normsage: serving " << serve_kb << " on http://" << host << ":" << port << "\n";
            if (!service.listen(host, port)) {
                std::cerr << "normsage: cannot listen on " << host << ":" << port << "\n";
                return kConfig;
            }
            return kOk;
        }
    } catch (const BackendError& e) {
        std::cerr << "normsage: backend failure: " << e.what() << "\n";
        return e.kind() == BackendError::Kind::budget_exhausted ? kBudget : kBackend;
    } catch (const VerdictError& e) {
        std::cerr << "normsage: backend failure: " << e.what() << "\n";
        return kBackend;
    } catch (const std::exception& e) {
        std::cerr << "normsage: " << e.what() << "\n";
        return kConfig;
    }
    return kOk;
}
