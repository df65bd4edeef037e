#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "melm/codemix.hpp"
#include "melm/config.hpp"
#include "melm/corpus.hpp"
#include "melm/errors.hpp"
#include "melm/eval.hpp"
#include "melm/generate.hpp"
#include "melm/mlm.hpp"
#include "melm/tagger.hpp"

namespace melm {

namespace io {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << content;
}

inline Corpus load_corpus(const std::string& path, const std::string& language) {
    return parse_conll(read_file(path), language);
}

}  // namespace io

// Seed salts for the pipeline stages; every stage derives its own stream.
namespace stage {
inline constexpr uint64_t codemix = 1;
inline constexpr uint64_t model_init = 2;
inline constexpr uint64_t finetune = 3;
inline constexpr uint64_t generate = 4;
inline constexpr uint64_t filter = 5;
}  // namespace stage

struct PipelineResult {
    std::size_t gold_sentences = 0;
    std::size_t codemixed_sentences = 0;
    std::size_t generated_samples = 0;
    std::size_t kept_samples = 0;
    std::size_t skipped = 0;
    FilterReport filter_report;
    std::string output_path;      // gold ∪ (code-mixed) ∪ kept augmentations
    std::string provenance_path;
    std::string manifest_path;
    std::string checkpoint_path;
};

inline std::vector<Corpus> load_train_corpora(const PipelineConfig& config) {
    if (config.train_paths.empty()) throw DataError("no train.<lang> paths configured");
    std::vector<Corpus> corpora;
    for (const auto& [lang, path] : config.train_paths)  // sorted by language
        corpora.push_back(io::load_corpus(path, lang));
    return corpora;
}

inline std::map<std::pair<std::string, std::string>, EmbeddingTable> load_embedding_tables(
    const PipelineConfig& config) {
    std::map<std::pair<std::string, std::string>, EmbeddingTable> tables;
    for (const auto& [pair, path] : config.embedding_paths) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open embeddings file '" + path + "'");
        EmbeddingTable table = load_embeddings(in);
        table.src_lang = pair.first;
        table.tgt_lang = pair.second;
        tables[pair] = std::move(table);
    }
    return tables;
}

inline std::set<std::string> declared_languages(const PipelineConfig& config) {
    std::set<std::string> langs;
    for (const auto& [lang, path] : config.train_paths) langs.insert(lang);
    return langs;
}

inline std::string provenance_tsv(const std::vector<AugmentedSample>& samples) {
    std::ostringstream out;
    out << "source\tround\treplacements\n";
    for (const auto& s : samples) {
        out << s.provenance.source_index << "\t" << s.provenance.round << "\t";
        for (std::size_t i = 0; i < s.provenance.positions.size(); ++i)
            out << (i ? " " : "") << s.provenance.positions[i] << ":" << s.provenance.chosen[i];
        out << "\n";
    }
    return out.str();
}

// The end-to-end run: (multilingual only) code-mix the gold data, fine-tune
// the masked LM on gold plus code-mixed sequences, generate R rounds,
// filter with a gold-trained tagger, and emit the union as CoNLL with a
// provenance sidecar and a reusable manifest.
inline PipelineResult run_pipeline(const PipelineConfig& config) {
    config.validate_paths();
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);

    const auto corpora = load_train_corpora(config);
    Corpus gold;
    for (const auto& c : corpora)
        for (const auto& s : c.sentences) gold.add(s);
    if (config.multilingual() && gold.languages.size() < 2)
        throw DataError("multilingual mode needs at least two train languages");
    if (!config.multilingual() && config.train_paths.size() != 1)
        throw DataError("monolingual mode expects exactly one train language");

    PipelineResult result;
    result.gold_sentences = gold.size();

    Corpus melm_train = gold;
    if (config.multilingual()) {
        const EntityIndex index = build_entity_index(corpora);
        const auto tables = load_embedding_tables(config);
        const Corpus mixed =
            codemix_corpus(corpora, config.codemix, index, tables,
                           derive_seed(config.seed, {stage::codemix}));
        result.codemixed_sentences = mixed.size();
        melm_train = concat(gold, mixed);
        std::ofstream out(fs::path(config.out_dir) / "codemixed.conll", std::ios::binary);
        write_conll(mixed, out, "");
    }

    Vocabulary vocab =
        build_vocab(melm_train, config.min_freq, config.classes, declared_languages(config));
    TinyMlm model(std::move(vocab), config.mlm, derive_seed(config.seed, {stage::model_init}));
    model.init_label_embeddings(config.default_label_words());
    RandomStream finetune_rng(derive_seed(config.seed, {stage::finetune}));
    model.finetune(melm_train, config.mlm_train_config(), finetune_rng);

    result.checkpoint_path = (fs::path(config.out_dir) / "mlm.ckpt").string();
    {
        std::ofstream out(result.checkpoint_path, std::ios::binary);
        model.save(out);
    }

    GenerateOptions gen;
    gen.mask = config.mask;
    gen.language_markers = config.multilingual();
    gen.renormalize = config.renormalize_top_k;
    gen.threads = config.threads;
    const AugmentResult generated =
        augment(melm_train, model, gen, derive_seed(config.seed, {stage::generate}));
    result.generated_samples = generated.samples.size();
    result.skipped = generated.skipped.size();
    if (!generated.skipped.empty()) {
        std::ostringstream log;
        for (const auto& [idx, reason] : generated.skipped)
            log << idx << "\t" << reason << "\n";
        io::write_file((fs::path(config.out_dir) / "augment_skips.log").string(), log.str());
    }

    RandomStream filter_rng(derive_seed(config.seed, {stage::filter}));
    const PerceptronTagger tagger = train_tagger(gold, config.filter_epochs, filter_rng);
    const auto kept = filter_consistent(generated.samples, tagger, config.filter_dedup,
                                        &melm_train, &result.filter_report);
    result.kept_samples = kept.size();

    Corpus output = melm_train;
    for (const auto& sample : kept) output.add(sample.sentence);

    result.output_path = (fs::path(config.out_dir) / "train_augmented.conll").string();
    const std::string default_lang =
        output.languages.size() == 1 ? *output.languages.begin() : std::string();
    {
        std::ofstream out(result.output_path, std::ios::binary);
        write_conll(output, out, default_lang);
    }
    result.provenance_path = (fs::path(config.out_dir) / "provenance.tsv").string();
    io::write_file(result.provenance_path, provenance_tsv(kept));
    io::write_file((fs::path(config.out_dir) / "filter_report.txt").string(),
                   result.filter_report.to_text());
    result.manifest_path = (fs::path(config.out_dir) / "manifest.txt").string();
    io::write_file(result.manifest_path, config.manifest());

    // Self-check: the emitted corpus must parse back to the same sentences.
    const Corpus reread = parse_conll(io::read_file(result.output_path), default_lang);
    if (!(reread == output))
        throw DataError("self-check failed: written corpus does not round-trip");
    return result;
}

}  // namespace melm
