#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "melm/codemix.hpp"
#include "melm/errors.hpp"
#include "melm/masking.hpp"
#include "melm/mlm.hpp"
#include "melm/util.hpp"

namespace melm {

inline constexpr const char* kVersion = "0.1.0";

// Flat "key = value" run configuration. The written manifest is itself a
// valid config file, so a run can be reproduced from its manifest alone.
struct PipelineConfig {
    std::string mode = "monolingual";  // or "multilingual"
    uint64_t seed = 0;
    std::string out_dir = "out";
    int threads = 1;

    std::map<std::string, std::string> train_paths, dev_paths, test_paths;  // language -> path
    std::map<std::pair<std::string, std::string>, std::string> embedding_paths;

    MaskingConfig mask;
    bool renormalize_top_k = false;

    MlmConfig mlm;
    int mlm_epochs = 200;
    int mlm_batch = 16;
    double mlm_lr = 1e-2;
    double mlm_momentum = 0.95;
    std::size_t min_freq = 1;

    CodeMixConfig codemix;
    bool filter_dedup = true;
    int filter_epochs = 5;

    std::set<std::string> classes;
    std::map<std::string, std::string> label_words;

    bool multilingual() const { return mode == "multilingual"; }

    void set(const std::string& key, const std::string& value);
    std::string canonical() const;
    std::string config_hash() const { return to_hex(fnv1a(canonical())); }
    std::string manifest() const;
    void validate_paths() const;

    MlmTrainConfig mlm_train_config() const {
        return MlmTrainConfig{mlm_epochs, mlm_batch,          mlm_lr,
                              mlm_momentum, mask.eta, multilingual()};
    }

    std::map<std::string, std::string> default_label_words() const {
        std::map<std::string, std::string> words = {{"PER", "person"},
                                                    {"ORG", "organization"},
                                                    {"LOC", "location"},
                                                    {"MISC", "miscellaneous"}};
        for (const auto& [cls, word] : label_words) words[cls] = word;
        return words;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const uint64_t v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" +
                          value + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
    }
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

}  // namespace detail

inline void PipelineConfig::set(const std::string& key, const std::string& value) {
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_int;
    using detail::parse_u64;
    auto starts = [&](const char* prefix) { return key.rfind(prefix, 0) == 0; };

    if (key == "mode") {
        if (value != "monolingual" && value != "multilingual")
            throw ConfigError("config key 'mode': expected monolingual or multilingual");
        mode = value;
    } else if (key == "seed") {
        seed = parse_u64(key, value);
    } else if (key == "out_dir") {
        out_dir = value;
    } else if (key == "threads") {
        threads = parse_int(key, value);
        if (threads < 1) throw ConfigError("config key 'threads': must be >= 1");
    } else if (starts("train.")) {
        train_paths[key.substr(6)] = value;
    } else if (starts("dev.")) {
        dev_paths[key.substr(4)] = value;
    } else if (starts("test.")) {
        test_paths[key.substr(5)] = value;
    } else if (starts("embeddings.")) {
        const std::string pair = key.substr(11);
        const auto dash = pair.find('-');
        if (dash == std::string::npos || dash == 0 || dash + 1 == pair.size())
            throw ConfigError("config key '" + key + "': expected embeddings.<src>-<tgt>");
        embedding_paths[{pair.substr(0, dash), pair.substr(dash + 1)}] = value;
    } else if (key == "mask.eta") {
        mask.eta = parse_double(key, value);
        if (mask.eta <= 0.0 || mask.eta > 1.0)
            throw ConfigError("config key 'mask.eta': must lie in (0, 1]");
    } else if (key == "mask.mu") {
        mask.mu = parse_double(key, value);
        if (mask.mu <= 0.0 || mask.mu > 1.0)
            throw ConfigError("config key 'mask.mu': must lie in (0, 1]");
    } else if (key == "mask.rounds") {
        mask.rounds = parse_int(key, value);
        if (mask.rounds < 1) throw ConfigError("config key 'mask.rounds': must be >= 1");
    } else if (key == "mask.k") {
        mask.k = parse_int(key, value);
        if (mask.k < 1) throw ConfigError("config key 'mask.k': must be >= 1");
    } else if (key == "generate.renormalize") {
        renormalize_top_k = parse_bool(key, value);
    } else if (key == "mlm.dim") {
        mlm.dim = parse_int(key, value);
    } else if (key == "mlm.heads") {
        mlm.heads = parse_int(key, value);
    } else if (key == "mlm.blocks") {
        mlm.blocks = parse_int(key, value);
    } else if (key == "mlm.ff_mult") {
        mlm.ff_mult = parse_int(key, value);
    } else if (key == "mlm.max_len") {
        mlm.max_len = parse_int(key, value);
    } else if (key == "mlm.init_std") {
        mlm.init_std = parse_double(key, value);
    } else if (key == "mlm.epochs") {
        mlm_epochs = parse_int(key, value);
    } else if (key == "mlm.batch") {
        mlm_batch = parse_int(key, value);
    } else if (key == "mlm.lr") {
        mlm_lr = parse_double(key, value);
    } else if (key == "mlm.momentum") {
        mlm_momentum = parse_double(key, value);
    } else if (key == "mlm.min_freq") {
        min_freq = parse_u64(key, value);
        if (min_freq < 1) throw ConfigError("config key 'mlm.min_freq': must be >= 1");
    } else if (key == "codemix.strategy") {
        codemix.strategy = CodeMixConfig::parse_strategy(value);
    } else if (key == "codemix.prob") {
        codemix.substitute_prob = parse_double(key, value);
        if (codemix.substitute_prob < 0.0 || codemix.substitute_prob > 1.0)
            throw ConfigError("config key 'codemix.prob': must lie in [0, 1]");
    } else if (key == "filter.dedup") {
        filter_dedup = parse_bool(key, value);
    } else if (key == "filter.epochs") {
        filter_epochs = parse_int(key, value);
    } else if (key == "classes") {
        classes.clear();
        std::istringstream in(value);
        std::string cls;
        while (std::getline(in, cls, ',')) {
            cls = detail::trim(cls);
            if (!cls.empty()) classes.insert(cls);
        }
    } else if (starts("label_word.")) {
        label_words[key.substr(11)] = value;
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

inline PipelineConfig parse_config(std::string_view text) {
    PipelineConfig cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            if (pos >= text.size()) break;
            eol = text.size();
        }
        const std::string line = detail::trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        cfg.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.view());
}

inline std::string PipelineConfig::canonical() const {
    std::map<std::string, std::string> kv;
    kv["mode"] = mode;
    kv["seed"] = std::to_string(seed);
    kv["out_dir"] = out_dir;
    kv["threads"] = std::to_string(threads);
    for (const auto& [lang, path] : train_paths) kv["train." + lang] = path;
    for (const auto& [lang, path] : dev_paths) kv["dev." + lang] = path;
    for (const auto& [lang, path] : test_paths) kv["test." + lang] = path;
    for (const auto& [pair, path] : embedding_paths)
        kv["embeddings." + pair.first + "-" + pair.second] = path;
    auto fmt = [](double v) {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, res.ptr);
    };
    kv["mask.eta"] = fmt(mask.eta);
    kv["mask.mu"] = fmt(mask.mu);
    kv["mask.rounds"] = std::to_string(mask.rounds);
    kv["mask.k"] = std::to_string(mask.k);
    kv["generate.renormalize"] = renormalize_top_k ? "true" : "false";
    kv["mlm.dim"] = std::to_string(mlm.dim);
    kv["mlm.heads"] = std::to_string(mlm.heads);
    kv["mlm.blocks"] = std::to_string(mlm.blocks);
    kv["mlm.ff_mult"] = std::to_string(mlm.ff_mult);
    kv["mlm.max_len"] = std::to_string(mlm.max_len);
    kv["mlm.init_std"] = fmt(mlm.init_std);
    kv["mlm.epochs"] = std::to_string(mlm_epochs);
    kv["mlm.batch"] = std::to_string(mlm_batch);
    kv["mlm.lr"] = fmt(mlm_lr);
    kv["mlm.momentum"] = fmt(mlm_momentum);
    kv["mlm.min_freq"] = std::to_string(min_freq);
    kv["codemix.strategy"] =
        codemix.strategy == CodeMixConfig::Strategy::ess ? "ess" : "random";
    kv["codemix.prob"] = fmt(codemix.substitute_prob);
    kv["filter.dedup"] = filter_dedup ? "true" : "false";
    kv["filter.epochs"] = std::to_string(filter_epochs);
    if (!classes.empty()) {
        std::string joined;
        for (const auto& cls : classes) joined += (joined.empty() ? "" : ",") + cls;
        kv["classes"] = joined;
    }
    for (const auto& [cls, word] : label_words) kv["label_word." + cls] = word;

    std::ostringstream out;
    for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
    return out.str();
}

inline std::string PipelineConfig::manifest() const {
    const std::string body = canonical();
    std::ostringstream out;
    out << "# melm run manifest\n";
    out << "# version = " << kVersion << "\n";
    out << "# config_hash = " << to_hex(fnv1a(body)) << "\n";
    out << body;
    return out.str();
}

inline void PipelineConfig::validate_paths() const {
    auto check = [](const std::string& what, const std::string& path) {
        if (!std::filesystem::exists(path))
            throw DataError(what + " file '" + path + "' does not exist");
    };
    for (const auto& [lang, path] : train_paths) check("train." + lang, path);
    for (const auto& [lang, path] : dev_paths) check("dev." + lang, path);
    for (const auto& [lang, path] : test_paths) check("test." + lang, path);
    for (const auto& [pair, path] : embedding_paths)
        check("embeddings." + pair.first + "-" + pair.second, path);
}

}  // namespace melm
