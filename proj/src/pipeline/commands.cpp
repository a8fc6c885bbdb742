#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "forge/common/parallel.hpp"
#include "forge/common/process.hpp"
#include "forge/dataset/builders.hpp"
#include "forge/frontend/ast.hpp"
#include "forge/lm/checkpoint.hpp"
#include "forge/lm/train.hpp"
#include "forge/pipeline/pipeline.hpp"
#include "json.hpp"

namespace forge::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string lower(data::Stage s) {
    std::string n(data::to_string(s));
    std::transform(n.begin(), n.end(), n.begin(), ::tolower);
    return n;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

void require_artifact(const fs::path& path, std::string_view hint) {
    if (!fs::is_regular_file(path))
        throw MissingArtifact("missing " + path.string() + "; run `forge " + std::string(hint) + "` first");
}

void require_input(const fs::path& path, std::string_view key) {
    if (path.empty() || !fs::is_regular_file(path))
        throw ConfigError("config " + std::string(key) + " does not name a readable file: " + path.string());
}

class Timer {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ingest/corpus.jsonl lines: {"id","label","source"}
std::vector<data::LabeledContract> read_corpus(const fs::path& path) {
    std::vector<data::LabeledContract> out;
    std::istringstream in(slurp(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = json::parse(line);
        out.push_back({j.at("id").get<std::string>(),
                       sol::ContractSource::make(j.at("source").get<std::string>(), j.at("id").get<std::string>()),
                       data::parse_tag(j.at("label").get<std::string>())});
    }
    return out;
}

std::vector<data::Stage> stages_for(const PipelineConfig& cfg, std::optional<data::Stage> stage) {
    if (stage) return {*stage};
    return cfg.stages;
}

lm::TinyLmConfig model_config(const PipelineConfig& cfg, int vocab_size) {
    lm::TinyLmConfig mc;
    mc.vocab_size = vocab_size;
    mc.embed_dim = cfg.model.embed_dim;
    mc.num_layers = cfg.model.num_layers;
    mc.num_heads = cfg.model.num_heads;
    mc.context_len = cfg.model.context_len;
    mc.seed = derive_seed(cfg.seed, "model");
    return mc;
}

/// Loads the base checkpoint, or learns the tokenizer and pretrains a base model
/// on the ingested sources when none matches the settings.
lm::Checkpoint ensure_base(const PipelineConfig& cfg, const Layout& layout, std::vector<fs::path>& inputs,
                           std::vector<fs::path>& outputs) {
    const auto path = layout.base_checkpoint();
    if (fs::is_regular_file(path)) {
        auto ck = lm::load_checkpoint(path);
        const auto expect = model_config(cfg, ck.tokenizer.vocab_size());
        if (ck.model.config == expect && static_cast<int>(ck.tokenizer.merges().size()) <= cfg.model.bpe_merges &&
            ck.lineage == std::vector<std::string>{"base"}) {
            inputs.push_back(path);
            return ck;
        }
        spdlog::info("base checkpoint does not match the model settings; rebuilding it");
    }
    require_artifact(layout.corpus(), "ingest");
    inputs.push_back(layout.corpus());
    const auto corpus = read_corpus(layout.corpus());
    std::vector<std::string> texts;
    for (const auto& c : corpus) texts.push_back(c.source.text);
    std::vector<std::string> tokenizer_texts = texts;
    tokenizer_texts.push_back(std::string(data::kDetectPrompt) + "\n" + std::string(data::kGeneratePrompt) + "\n" +
                              data::tag_block(data::Tag::Security) + data::tag_block(data::Tag::Vulnerable));

    lm::Checkpoint ck;
    ck.tokenizer = lm::Tokenizer::train(tokenizer_texts, static_cast<std::size_t>(cfg.model.bpe_merges));
    ck.model = lm::TinyLm::init(model_config(cfg, ck.tokenizer.vocab_size()));
    lm::PretrainConfig pc;
    pc.epochs = cfg.model.pretrain_epochs;
    pc.learning_rate = cfg.model.pretrain_learning_rate;
    pc.batch_size = cfg.model.pretrain_batch_size;
    pc.seed = derive_seed(cfg.seed, "pretrain");
    ck.model = lm::pretrain_base(std::move(ck.model), ck.tokenizer, texts, pc);
    ck.lineage = {"base"};
    lm::save_checkpoint(path, ck);
    outputs.push_back(path);
    return lm::load_checkpoint(path);  // continue from the stored precision
}

std::optional<data::Stage> previous_stage(const PipelineConfig& cfg, data::Stage s) {
    std::optional<data::Stage> prev;
    for (auto e : cfg.stages)
        if (e < s) prev = e;
    return prev;
}

double round_to(double v, int digits) {
    const double f = std::pow(10.0, digits);
    return std::round(v * f) / f;
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

}  // namespace

fs::path Layout::dataset(data::Stage s, std::string_view split) const {
    return root / "datasets" / lower(s) / (std::string(split) + ".jsonl");
}
fs::path Layout::checkpoint(data::Stage s) const { return root / "model" / (lower(s) + ".ckpt"); }
fs::path Layout::train_log(data::Stage s) const { return root / "logs" / ("train_" + lower(s) + ".jsonl"); }

std::string sha256_text(std::string_view text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

std::string sha256_file(const fs::path& path) { return sha256_text(slurp(path)); }

void record_run(const PipelineConfig& cfg, const std::string& command, const std::vector<fs::path>& inputs,
                const std::vector<fs::path>& outputs, double seconds) {
    const Layout layout{cfg.output_dir};
    json manifest = json::object();
    if (fs::is_regular_file(layout.manifest())) {
        try {
            manifest = json::parse(slurp(layout.manifest()));
        } catch (const json::exception&) {
            spdlog::warn("manifest is unreadable; starting a new one");
        }
    }
    auto name = [&](const fs::path& p) {
        const auto rel = p.lexically_relative(cfg.output_dir);
        return (!rel.empty() && *rel.begin() != "..") ? rel.generic_string() : p.generic_string();
    };
    json entry;
    entry["config_hash"] = sha256_text(cfg.canonical());
    entry["inputs"] = json::object();
    for (const auto& p : inputs)
        if (fs::is_regular_file(p)) entry["inputs"][name(p)] = sha256_file(p);
    entry["outputs"] = json::object();
    for (const auto& p : outputs) entry["outputs"][name(p)] = sha256_file(p);
    entry["seconds"] = round_to(seconds, 3);
    manifest["config_hash"] = sha256_text(cfg.canonical());
    manifest["commands"][command] = entry;
    write_text(layout.manifest(), manifest.dump(2) + "\n");
}

IngestStats cmd_ingest(const PipelineConfig& cfg) {
    Timer timer;
    const Layout layout{cfg.output_dir};
    if (!fs::is_directory(cfg.corpus_dir)) throw ConfigError("corpus directory is not readable: " + cfg.corpus_dir.string());
    std::map<std::string, data::Tag> labels;
    std::vector<fs::path> inputs;
    if (!cfg.labels_path.empty()) {
        require_input(cfg.labels_path, "paths.labels_path");
        inputs.push_back(cfg.labels_path);
        std::istringstream in(slurp(cfg.labels_path));
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                const auto j = json::parse(line);
                labels[j.at("id").get<std::string>()] = data::parse_tag(j.at("label").get<std::string>());
            } catch (const std::exception& e) {
                throw ConfigError("labels file line " + std::to_string(n) + ": " + e.what());
            }
        }
    }

    std::vector<fs::path> files;
    std::error_code ec;
    for (fs::recursive_directory_iterator it(cfg.corpus_dir, ec), end; !ec && it != end; it.increment(ec))
        if (it->is_regular_file() && it->path().extension() == ".sol") files.push_back(it->path());
    if (ec) throw ConfigError("cannot list corpus directory: " + ec.message());
    std::sort(files.begin(), files.end());

    IngestStats stats;
    std::vector<data::LabeledContract> kept;
    std::vector<std::pair<std::string, std::string>> unlabeled;
    for (const auto& path : files) {
        ++stats.total;
        inputs.push_back(path);
        const std::string id = fs::relative(path, cfg.corpus_dir).replace_extension().generic_string();
        std::string text = slurp(path);
        bool parsed = false;
        std::size_t contracts = 0;
        try {
            const auto source = sol::ContractSource::make(text, path.generic_string());
            const auto ast = sol::parse_source(source.text);
            contracts = sol::count_contracts(ast);
            parsed = ast.clean;
        } catch (const std::exception& e) {
            spdlog::debug("ingest: {} does not parse: {}", id, e.what());
        }
        if (parsed && contracts > 1) {
            ++stats.dropped_multi_contract;
            continue;
        }
        if (!parsed || contracts == 0) {
            ++stats.dropped_unparseable;
            continue;
        }
        if (auto it = labels.find(id); it != labels.end()) {
            kept.push_back({id, sol::ContractSource::make(std::move(text), path.generic_string()), it->second});
        } else {
            unlabeled.emplace_back(id, std::move(text));
        }
    }
    if (!unlabeled.empty()) {
        set_process_limit(cfg.tools.max_processes);
        const auto outcomes = security::label_corpus(unlabeled, cfg.tools);
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            if (!outcomes[i].label) {
                ++stats.dropped_unlabeled;
                continue;
            }
            ++stats.labeled_by_analyzer;
            kept.push_back({unlabeled[i].first, sol::ContractSource::make(unlabeled[i].second, unlabeled[i].first),
                            *outcomes[i].label});
        }
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    }
    stats.kept = kept.size();

    std::string lines;
    for (const auto& c : kept) {
        json j;
        j["id"] = c.id;
        j["label"] = data::to_string(c.label);
        j["source"] = c.source.text;
        lines += j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
    }
    write_text(layout.corpus(), lines);
    json m;
    m["total"] = stats.total;
    m["kept"] = stats.kept;
    m["dropped"] = {{"multi_contract", stats.dropped_multi_contract},
                    {"unparseable", stats.dropped_unparseable},
                    {"unlabeled", stats.dropped_unlabeled}};
    m["labeled_by_analyzer"] = stats.labeled_by_analyzer;
    write_text(layout.corpus_manifest(), m.dump(2) + "\n");
    spdlog::info("ingest: {} files, kept {}, dropped {} multi-contract, {} unparseable, {} unlabeled", stats.total,
                 stats.kept, stats.dropped_multi_contract, stats.dropped_unparseable, stats.dropped_unlabeled);
    record_run(cfg, "ingest", inputs, {layout.corpus(), layout.corpus_manifest()}, timer.seconds());
    return stats;
}

void cmd_build(const PipelineConfig& cfg, std::optional<data::Stage> stage) {
    const Layout layout{cfg.output_dir};
    require_artifact(layout.corpus(), "ingest");
    const auto corpus = read_corpus(layout.corpus());
    for (auto s : stages_for(cfg, stage)) {
        Timer timer;
        std::vector<data::TrainingRecord> records;
        switch (s) {
            case data::Stage::CI: records = data::build_ci_dataset(corpus, derive_seed(cfg.seed, "build/ci")); break;
            case data::Stage::VD: records = data::build_vd_dataset(corpus); break;
            case data::Stage::TI: records = data::build_ti_dataset(data::instruction_samples(corpus)); break;
        }
        const auto split = data::split_811(std::move(records), derive_seed(cfg.seed, "split/" + lower(s)));
        data::write_jsonl(layout.dataset(s, "train"), split.train);
        data::write_jsonl(layout.dataset(s, "valid"), split.valid);
        data::write_jsonl(layout.dataset(s, "test"), split.test);
        spdlog::info("build {}: {} train, {} valid, {} test", data::to_string(s), split.train.size(), split.valid.size(),
                     split.test.size());
        record_run(cfg, "build/" + lower(s), {layout.corpus()},
                   {layout.dataset(s, "train"), layout.dataset(s, "valid"), layout.dataset(s, "test")}, timer.seconds());
    }
}

void cmd_train(const PipelineConfig& cfg, std::optional<data::Stage> stage) {
    const Layout layout{cfg.output_dir};
    for (auto s : stages_for(cfg, stage)) {
        Timer timer;
        const auto train_path = layout.dataset(s, "train");
        require_artifact(train_path, "build --stage " + lower(s));
        std::vector<fs::path> inputs{train_path}, outputs;
        const auto records = data::read_jsonl(train_path);

        lm::Checkpoint start;
        const auto prev = previous_stage(cfg, s);
        if (prev && !cfg.train.fresh_adapters) {
            require_artifact(layout.checkpoint(*prev), "train --stage " + lower(*prev));
            inputs.push_back(layout.checkpoint(*prev));
            start = lm::load_checkpoint(layout.checkpoint(*prev));
            if (!start.adapters) throw lm::CheckpointError(layout.checkpoint(*prev).string() + " holds no adapters");
        } else {
            start = ensure_base(cfg, layout, inputs, outputs);
            start.adapters = lm::AdapterWeights::init(start.model.config, cfg.train.lora_r, cfg.train.lora_alpha,
                                                      derive_seed(cfg.seed, "adapters/" + lower(s)));
        }
        lm::TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, "train");
        std::string log;
        auto result = lm::train_stage(start.model, start.tokenizer, std::move(*start.adapters), records, tc, s,
                                      [&](const lm::EpochLog& e) { log += lm::to_jsonl(e) + "\n"; });
        write_text(layout.train_log(s), log);
        lm::Checkpoint out{std::move(start.model), std::move(start.tokenizer), std::move(result.adapters),
                           std::move(start.lineage), result.rng_state};
        out.lineage.push_back(lower(s));
        lm::save_checkpoint(layout.checkpoint(s), out);
        outputs.push_back(layout.train_log(s));
        outputs.push_back(layout.checkpoint(s));
        record_run(cfg, "train/" + lower(s), inputs, outputs, timer.seconds());
    }
}

void cmd_generate(const PipelineConfig& cfg) {
    Timer timer;
    const Layout layout{cfg.output_dir};
    require_input(cfg.tasks_path, "paths.tasks_path");
    const auto ckpt_path = layout.checkpoint(data::Stage::TI);
    require_artifact(ckpt_path, "train --stage ti");
    const auto tasks = metrics::read_tasks(cfg.tasks_path);
    const auto ckpt = lm::load_checkpoint(ckpt_path);

    const auto per = static_cast<std::size_t>(cfg.samples_per_task);
    std::vector<metrics::GeneratedSample> samples(tasks.size() * per);
    parallel_for(samples.size(), cfg.workers, [&](std::size_t u) {
        const auto& task = tasks[u / per];
        const int index = static_cast<int>(u % per);
        lm::SamplerConfig sc = cfg.sampler;
        sc.seed = derive_seed(cfg.seed, task.task_id, static_cast<std::uint64_t>(index));
        samples[u] = {task.task_id, index, lm::generate_secure(ckpt, task.instruction, sc)};
    });
    fs::create_directories(layout.samples().parent_path());
    metrics::write_samples(layout.samples(), samples);
    spdlog::info("generate: {} samples for {} tasks", samples.size(), tasks.size());
    record_run(cfg, "generate", {cfg.tasks_path, ckpt_path}, {layout.samples()}, timer.seconds());
}

void cmd_evaluate(const PipelineConfig& cfg) {
    Timer timer;
    const Layout layout{cfg.output_dir};
    require_input(cfg.tasks_path, "paths.tasks_path");
    require_artifact(layout.samples(), "generate");
    const auto tasks = metrics::read_tasks(cfg.tasks_path);
    const auto samples = metrics::read_samples(layout.samples());

    const auto rows = metrics::score_samples(tasks, samples, cfg.metrics, cfg.workers);
    fs::create_directories(layout.scores().parent_path());
    metrics::write_scores(layout.scores(), rows);
    metrics::write_summary(layout.metric_summary(), metrics::summarize(metrics::aggregate_rows(rows)));

    set_process_limit(cfg.tools.max_processes);
    std::vector<security::SampleAnalysis> results(samples.size());
    parallel_for(samples.size(), cfg.workers, [&](std::size_t i) {
        auto& r = results[i];
        r.task_id = samples[i].task_id;
        r.sample_index = samples[i].sample_index;
        r.compile = security::compile_check(samples[i].code, cfg.tools);
        if (r.compile.compiled) r.detection = security::analyze(samples[i].code, cfg.tools);
    });
    std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
        return std::tie(a.task_id, a.sample_index) < std::tie(b.task_id, b.sample_index);
    });
    const auto summary = security::security_metrics(results);
    security::write_findings(layout.findings(), results);
    security::write_security_summary(layout.security_summary(), summary);
    spdlog::info("evaluate: {} samples, {} compiled, {} with findings", summary.total, summary.compiled,
                 summary.compiled_with_findings);
    record_run(cfg, "evaluate", {cfg.tasks_path, layout.samples()},
               {layout.scores(), layout.metric_summary(), layout.findings(), layout.security_summary()},
               timer.seconds());
}

void cmd_report(const PipelineConfig& cfg) {
    Timer timer;
    const Layout layout{cfg.output_dir};
    require_artifact(layout.scores(), "evaluate");
    require_artifact(layout.metric_summary(), "evaluate");
    require_artifact(layout.security_summary(), "evaluate");
    const auto m = metrics::read_summary(layout.metric_summary());
    const auto s = security::read_security_summary(layout.security_summary());

    const double values[] = {round_to(m.avg_bleu, 4), round_to(m.best_bleu, 4), round_to(m.avg_cb, 4),
                             round_to(m.best_cb, 4), security::round2(s.com_pass), security::round2(s.vul_rate),
                             security::round2(s.safe_aval)};
    json summary;
    for (std::size_t i = 0; i < 7; ++i) summary[std::string(kReportColumns[i])] = values[i];
    summary["tasks"] = m.tasks;
    summary["samples"] = s.total;
    summary["security_approximate"] = s.approximate;
    write_text(layout.summary(), summary.dump(2) + "\n");

    std::string header = "|", rule = "|", row = "|";
    for (std::size_t i = 0; i < 7; ++i) {
        header += " " + std::string(kReportColumns[i]) + " |";
        rule += "---|";
        row += " " + fixed(values[i], i < 4 ? 4 : 2) + " |";
    }
    std::string md = "# Evaluation report\n\n" + header + "\n" + rule + "\n" + row + "\n\n";
    md += std::to_string(m.tasks) + " tasks, " + std::to_string(s.total) + " samples.\n";
    if (s.approximate) md += "Compilation was checked with the internal parser, so ComPass is approximate.\n";
    write_text(layout.report(), md);
    spdlog::info("report written to {}", layout.report().string());
    record_run(cfg, "report", {layout.scores(), layout.metric_summary(), layout.security_summary()},
               {layout.summary(), layout.report()}, timer.seconds());
}

}  // namespace forge::pipeline
