#include "forge/pipeline/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace forge::pipeline {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto t = trim(text);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError("config key " + key + ": '" + text + "' is not a valid number");
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    const auto t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError("config key " + key + ": '" + text + "' is not a boolean");
}

template <typename T>
std::string show(T v) {
    if constexpr (std::is_same_v<T, bool>) {
        return v ? "true" : "false";
    } else {
        char buf[64];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, ptr);
    }
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
    return out;
}

struct Key {
    std::function<void(PipelineConfig&, const std::string& key, const std::string& value)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

template <typename T, typename Field>
Key number(Field field) {
    return {[field](PipelineConfig& c, const std::string& k, const std::string& v) { field(c) = parse_number<T>(k, v); },
            [field](const PipelineConfig& c) { return show(field(const_cast<PipelineConfig&>(c))); }};
}

template <typename Field>
Key path(Field field) {
    return {[field](PipelineConfig& c, const std::string&, const std::string& v) { field(c) = trim(v); },
            [field](const PipelineConfig& c) { return field(const_cast<PipelineConfig&>(c)).generic_string(); }};
}

template <typename Field>
Key text(Field field) {
    return {[field](PipelineConfig& c, const std::string&, const std::string& v) { field(c) = trim(v); },
            [field](const PipelineConfig& c) { return std::string(field(const_cast<PipelineConfig&>(c))); }};
}

const std::map<std::string, Key>& keys() {
    using C = PipelineConfig;
    static const std::map<std::string, Key> table = {
        {"paths.corpus_dir", path([](C& c) -> fs::path& { return c.corpus_dir; })},
        {"paths.labels_path", path([](C& c) -> fs::path& { return c.labels_path; })},
        {"paths.tasks_path", path([](C& c) -> fs::path& { return c.tasks_path; })},
        {"paths.output_dir", path([](C& c) -> fs::path& { return c.output_dir; })},
        {"run.seed", number<std::uint64_t>([](C& c) -> std::uint64_t& { return c.seed; })},
        {"run.workers", number<std::size_t>([](C& c) -> std::size_t& { return c.workers; })},
        {"run.samples_per_task", number<int>([](C& c) -> int& { return c.samples_per_task; })},
        {"run.stages",
         {[](C& c, const std::string& k, const std::string& v) {
              c.stages.clear();
              for (const auto& item : split_list(v)) {
                  try {
                      c.stages.push_back(data::parse_stage(item));
                  } catch (const std::exception&) {
                      throw ConfigError("config key " + k + ": unknown stage '" + item + "'");
                  }
              }
              std::sort(c.stages.begin(), c.stages.end());
              c.stages.erase(std::unique(c.stages.begin(), c.stages.end()), c.stages.end());
          },
          [](const C& c) {
              std::vector<std::string> names;
              for (auto s : c.stages) {
                  std::string n(data::to_string(s));
                  std::transform(n.begin(), n.end(), n.begin(), ::tolower);
                  names.push_back(n);
              }
              return join(names);
          }}},
        {"model.embed_dim", number<int>([](C& c) -> int& { return c.model.embed_dim; })},
        {"model.num_layers", number<int>([](C& c) -> int& { return c.model.num_layers; })},
        {"model.num_heads", number<int>([](C& c) -> int& { return c.model.num_heads; })},
        {"model.context_len", number<int>([](C& c) -> int& { return c.model.context_len; })},
        {"model.bpe_merges", number<int>([](C& c) -> int& { return c.model.bpe_merges; })},
        {"model.pretrain_epochs", number<int>([](C& c) -> int& { return c.model.pretrain_epochs; })},
        {"model.pretrain_learning_rate", number<double>([](C& c) -> double& { return c.model.pretrain_learning_rate; })},
        {"model.pretrain_batch_size", number<int>([](C& c) -> int& { return c.model.pretrain_batch_size; })},
        {"train.learning_rate", number<double>([](C& c) -> double& { return c.train.learning_rate; })},
        {"train.epochs_ci", number<int>([](C& c) -> int& { return c.train.epochs_ci; })},
        {"train.epochs_vd", number<int>([](C& c) -> int& { return c.train.epochs_vd; })},
        {"train.epochs_ti", number<int>([](C& c) -> int& { return c.train.epochs_ti; })},
        {"train.lora_r", number<int>([](C& c) -> int& { return c.train.lora_r; })},
        {"train.lora_alpha", number<double>([](C& c) -> double& { return c.train.lora_alpha; })},
        {"train.batch_size", number<int>([](C& c) -> int& { return c.train.batch_size; })},
        {"train.optimizer",
         {[](C& c, const std::string& k, const std::string& v) {
              try {
                  c.train.optimizer = lm::parse_optimizer(trim(v));
              } catch (const std::invalid_argument&) {
                  throw ConfigError("config key " + k + ": unknown optimizer '" + v + "'");
              }
          },
          [](const C& c) { return std::string(lm::to_string(c.train.optimizer)); }}},
        {"train.fresh_adapters",
         {[](C& c, const std::string& k, const std::string& v) { c.train.fresh_adapters = parse_bool(k, v); },
          [](const C& c) { return show(c.train.fresh_adapters); }}},
        {"sampler.temperature", number<double>([](C& c) -> double& { return c.sampler.temperature; })},
        {"sampler.top_p", number<double>([](C& c) -> double& { return c.sampler.top_p; })},
        {"sampler.max_new_tokens", number<int>([](C& c) -> int& { return c.sampler.max_new_tokens; })},
        {"metrics.max_n", number<int>([](C& c) -> int& { return c.metrics.max_n; })},
        {"metrics.keyword_weight", number<double>([](C& c) -> double& { return c.metrics.keyword_weight; })},
        {"metrics.smoothing_epsilon", number<double>([](C& c) -> double& { return c.metrics.smoothing_epsilon; })},
        {"metrics.weights",
         {[](C& c, const std::string& k, const std::string& v) {
              const auto items = split_list(v);
              if (items.size() != 4) throw ConfigError("config key " + k + " needs four comma-separated weights");
              for (std::size_t i = 0; i < 4; ++i) c.metrics.codebleu_weights[i] = parse_number<double>(k, items[i]);
          },
          [](const C& c) {
              std::vector<std::string> items;
              for (double w : c.metrics.codebleu_weights) items.push_back(show(w));
              return join(items);
          }}},
        {"tools.solc_path", text([](C& c) -> std::string& { return c.tools.solc_path; })},
        {"tools.solc_versions",
         {[](C& c, const std::string&, const std::string& v) { c.tools.solc_versions = split_list(v); },
          [](const C& c) { return join(c.tools.solc_versions); }}},
        {"tools.solc_default_version", text([](C& c) -> std::string& { return c.tools.solc_default_version; })},
        {"tools.slither_path", text([](C& c) -> std::string& { return c.tools.slither_path; })},
        {"tools.detector_map", path([](C& c) -> fs::path& { return c.tools.detector_map; })},
        {"tools.max_processes", number<std::size_t>([](C& c) -> std::size_t& { return c.tools.max_processes; })},
    };
    return table;
}

void apply(PipelineConfig& c, const std::string& key, const std::string& value) {
    auto it = keys().find(key);
    if (it == keys().end()) throw ConfigError("unknown config key: " + key);
    it->second.set(c, key, value);
}

fs::path resolve(const fs::path& base, const fs::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    return (base / p).lexically_normal();
}

std::string resolve_tool(const fs::path& base, const std::string& p) {
    if (p.empty() || p.find('/') == std::string::npos || fs::path(p).is_absolute()) return p;
    return resolve(base, p).string();
}

}  // namespace

bool PipelineConfig::stage_enabled(data::Stage s) const {
    return std::find(stages.begin(), stages.end(), s) != stages.end();
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("invalid config: " + m); };
    if (output_dir.empty()) fail("paths.output_dir is empty");
    if (samples_per_task < 1) fail("run.samples_per_task must be at least 1");
    if (workers < 1) fail("run.workers must be at least 1");
    if (model.bpe_merges < 0) fail("model.bpe_merges must not be negative");
    if (model.pretrain_epochs < 0) fail("model.pretrain_epochs must not be negative");
    if (!(model.pretrain_learning_rate > 0) || model.pretrain_batch_size < 1) fail("pretraining settings must be positive");
    if (tools.max_processes < 1) fail("tools.max_processes must be at least 1");
    try {
        lm::TinyLmConfig mc;
        mc.vocab_size = 256 + model.bpe_merges + 6;
        mc.embed_dim = model.embed_dim;
        mc.num_layers = model.num_layers;
        mc.num_heads = model.num_heads;
        mc.context_len = model.context_len;
        mc.validate();
        if (4 * train.lora_r > model.embed_dim) fail("train.lora_r must not exceed model.embed_dim / 4");
        train.validate();
        sampler.validate();
        metrics.validate();
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
}

std::string PipelineConfig::canonical() const {
    std::string out;
    for (const auto& [name, key] : keys()) out += name + " = " + key.get(*this) + "\n";
    return out;
}

PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
    PipelineConfig c;
    fs::path base = fs::current_path();
    if (!path.empty()) {
        if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::read_ini(path.string(), tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(std::string("cannot parse config: ") + e.what());
        }
        for (const auto& [section, body] : tree) {
            if (body.empty()) throw ConfigError("config key outside a section: " + section);
            for (const auto& [key, value] : body) apply(c, section + "." + key, value.data());
        }
        base = fs::absolute(path).parent_path();
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override must look like section.key=value: " + o);
        apply(c, trim(o.substr(0, eq)), o.substr(eq + 1));
    }
    c.corpus_dir = resolve(base, c.corpus_dir);
    c.labels_path = resolve(base, c.labels_path);
    c.tasks_path = resolve(base, c.tasks_path);
    c.output_dir = resolve(base, c.output_dir);
    c.tools.detector_map = resolve(base, c.tools.detector_map);
    c.tools.solc_path = resolve_tool(base, c.tools.solc_path);
    c.tools.slither_path = resolve_tool(base, c.tools.slither_path);
    c.validate();
    return c;
}

std::string default_config_text() {
    const PipelineConfig c;
    std::string out, section;
    for (const auto& [name, key] : keys()) {
        const auto dot = name.find('.');
        if (name.substr(0, dot) != section) {
            section = name.substr(0, dot);
            out += (out.empty() ? "" : "\n") + ("[" + section + "]\n");
        }
        out += name.substr(dot + 1) + " = " + key.get(c) + "\n";
    }
    return out;
}

}  // namespace forge::pipeline
