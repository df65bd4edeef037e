// Command-line driver for the masked-entity augmentation pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "melm/codemix.hpp"
#include "melm/config.hpp"
#include "melm/corpus.hpp"
#include "melm/eval.hpp"
#include "melm/generate.hpp"
#include "melm/mlm.hpp"
#include "melm/pipeline.hpp"
#include "melm/synthetic.hpp"
#include "melm/tagger.hpp"

namespace fs = std::filesystem;
using namespace melm;

namespace {

struct ConfigArgs {
    std::string path;
    std::vector<std::string> overrides;

    PipelineConfig resolve() const {
        PipelineConfig cfg = path.empty() ? PipelineConfig{} : load_config(path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--set expects key=value, got '" + kv + "'");
            cfg.set(detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
        }
        return cfg;
    }
};

void add_config_options(CLI::App* cmd, ConfigArgs& args, bool required) {
    auto* opt = cmd->add_option("-c,--config", args.path, "run configuration file");
    if (required) opt->required();
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set seed=3");
}

std::pair<std::string, std::string> split_kv(const std::string& arg, const char* what) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError(std::string(what) + " expects name=path, got '" + arg + "'");
    return {arg.substr(0, eq), arg.substr(eq + 1)};
}

std::vector<uint64_t> parse_seed_list(const std::string& arg) {
    std::vector<uint64_t> seeds;
    std::istringstream in(arg);
    std::string field;
    while (std::getline(in, field, ',')) {
        field = detail::trim(field);
        if (!field.empty()) seeds.push_back(std::stoull(field));
    }
    if (seeds.empty()) throw ConfigError("--seeds expects a comma-separated list");
    return seeds;
}

Corpus load_labeled(const std::vector<std::string>& lang_paths, const char* what) {
    Corpus out;
    for (const auto& arg : lang_paths) {
        const auto [lang, path] = split_kv(arg, what);
        const Corpus c = io::load_corpus(path, lang);
        for (const auto& s : c.sentences) out.add(s);
    }
    return out;
}

// A checkpoint is only usable if it carries markers for every class and
// language the corpus needs.
void check_checkpoint_vocab(const Vocabulary& vocab, const Corpus& corpus, bool multilingual) {
    for (const auto& cls : corpus.classes())
        for (const Tag& tag : {Tag::b(cls), Tag::i(cls)})
            if (!vocab.contains(render_label_marker(tag)))
                throw CheckpointError("checkpoint vocabulary lacks marker " +
                                      render_label_marker(tag));
    if (!multilingual) return;
    std::set<std::string> langs = corpus.languages;
    for (const auto& s : corpus.sentences)
        for (const auto& l : s.token_langs) langs.insert(l);
    for (const auto& lang : langs)
        if (!vocab.contains(render_lang_marker(lang)))
            throw CheckpointError("checkpoint vocabulary lacks marker " +
                                  render_lang_marker(lang));
}

Corpus gold_union(const PipelineConfig& cfg) {
    Corpus gold;
    for (const auto& c : load_train_corpora(cfg))
        for (const auto& s : c.sentences) gold.add(s);
    return gold;
}

int cmd_synth(const std::string& out_dir, uint64_t seed, std::size_t train_n, std::size_t test_n,
              std::size_t full_n) {
    SyntheticConfig cfg;
    cfg.seed = seed;
    cfg.train_per_lang = train_n;
    cfg.test_per_lang = test_n;
    cfg.full_per_lang = full_n;
    const SyntheticData data = generate_synthetic(cfg);
    fs::create_directories(out_dir);

    PipelineConfig run;
    run.mode = "multilingual";
    run.seed = seed;
    run.out_dir = (fs::path(out_dir) / "out").string();
    run.classes = data.classes;
    for (const auto& lang : data.languages) {
        const auto dir = fs::path(out_dir);
        io::write_file((dir / ("train." + lang + ".conll")).string(),
                       write_conll(data.train.at(lang)));
        io::write_file((dir / ("test." + lang + ".conll")).string(),
                       write_conll(data.test.at(lang)));
        io::write_file((dir / ("full." + lang + ".conll")).string(),
                       write_conll(data.full.at(lang)));
        run.train_paths[lang] = (dir / ("train." + lang + ".conll")).string();
        run.test_paths[lang] = (dir / ("test." + lang + ".conll")).string();
    }
    for (const auto& [pair, table] : data.embeddings) {
        const std::string name = "muse." + pair.first + "-" + pair.second + ".vec";
        io::write_file((fs::path(out_dir) / name).string(), write_muse(table));
        run.embedding_paths[pair] = (fs::path(out_dir) / name).string();
    }
    io::write_file((fs::path(out_dir) / "synth.cfg").string(), run.canonical());
    std::cout << "wrote synthetic corpus for";
    for (const auto& lang : data.languages) std::cout << " " << lang;
    std::cout << " under " << out_dir << "\n";
    std::cout << "run config: " << (fs::path(out_dir) / "synth.cfg").string() << "\n";
    return 0;
}

int cmd_split(const std::string& in, const std::string& lang, std::size_t n, uint64_t seed,
              const std::string& out) {
    const Corpus corpus = io::load_corpus(in, lang);
    const Corpus sampled = sample_split(corpus, n, seed);
    io::write_file(out, write_conll(sampled));
    std::cout << "sampled " << sampled.size() << " of " << corpus.size() << " sentences -> "
              << out << "\n";
    return 0;
}

int cmd_codemix(const PipelineConfig& cfg, const std::string& out) {
    cfg.validate_paths();
    const auto corpora = load_train_corpora(cfg);
    const EntityIndex index = build_entity_index(corpora);
    const auto tables = load_embedding_tables(cfg);
    CodeMixStats stats;
    const Corpus mixed = codemix_corpus(corpora, cfg.codemix, index, tables,
                                        derive_seed(cfg.seed, {stage::codemix}), &stats);
    std::ofstream os(out, std::ios::binary);
    if (!os) throw DataError("cannot write '" + out + "'");
    write_conll(mixed, os, "");
    std::cout << "code-mixed " << mixed.size() << " sentences (" << stats.substituted
              << " substitutions, " << stats.failed << " skipped) -> " << out << "\n";
    return 0;
}

int cmd_train_mlm(const PipelineConfig& cfg, const std::vector<std::string>& extra,
                  const std::string& out) {
    cfg.validate_paths();
    Corpus train = gold_union(cfg);
    for (const auto& path : extra) {
        const Corpus c = parse_conll(io::read_file(path), "");
        for (const auto& s : c.sentences) train.add(s);
    }
    Vocabulary vocab = build_vocab(train, cfg.min_freq, cfg.classes, declared_languages(cfg));
    TinyMlm model(std::move(vocab), cfg.mlm, derive_seed(cfg.seed, {stage::model_init}));
    model.init_label_embeddings(cfg.default_label_words());
    RandomStream rng(derive_seed(cfg.seed, {stage::finetune}));
    const auto history = model.finetune(train, cfg.mlm_train_config(), rng);
    std::ofstream os(out, std::ios::binary);
    if (!os) throw DataError("cannot write '" + out + "'");
    model.save(os);
    std::cout << "fine-tuned on " << train.size() << " sentences, loss " << history.front()
              << " -> " << history.back() << ", checkpoint " << out << "\n";
    return 0;
}

int cmd_augment(const PipelineConfig& cfg, const std::string& model_path,
                const std::vector<std::string>& extra, const std::string& out,
                const std::string& provenance) {
    cfg.validate_paths();
    Corpus corpus = gold_union(cfg);
    for (const auto& path : extra) {
        const Corpus c = parse_conll(io::read_file(path), "");
        for (const auto& s : c.sentences) corpus.add(s);
    }
    std::ifstream in(model_path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + model_path + "'");
    const TinyMlm model = TinyMlm::load(in);
    check_checkpoint_vocab(model.vocab(), corpus, cfg.multilingual());

    GenerateOptions gen;
    gen.mask = cfg.mask;
    gen.language_markers = cfg.multilingual();
    gen.renormalize = cfg.renormalize_top_k;
    gen.threads = cfg.threads;
    const AugmentResult result =
        augment(corpus, model, gen, derive_seed(cfg.seed, {stage::generate}));

    Corpus augmented;
    for (const auto& s : result.samples) augmented.add(s.sentence);
    std::ofstream os(out, std::ios::binary);
    if (!os) throw DataError("cannot write '" + out + "'");
    write_conll(augmented, os, "");
    if (!provenance.empty()) io::write_file(provenance, provenance_tsv(result.samples));
    std::cout << "generated " << result.samples.size() << " samples (" << result.skipped.size()
              << " skipped) -> " << out << "\n";
    for (const auto& [idx, reason] : result.skipped)
        std::cerr << "skip sentence " << idx << ": " << reason << "\n";
    return 0;
}

int cmd_filter(const PipelineConfig& cfg, const std::string& in, const std::string& out,
               const std::string& report_path) {
    cfg.validate_paths();
    const Corpus gold = gold_union(cfg);
    const Corpus augmented = parse_conll(io::read_file(in), "");
    std::vector<AugmentedSample> samples;
    for (std::size_t i = 0; i < augmented.size(); ++i)
        samples.push_back({augmented.sentences[i], Provenance{i, 0, {}, {}}});

    RandomStream rng(derive_seed(cfg.seed, {stage::filter}));
    const PerceptronTagger tagger = train_tagger(gold, cfg.filter_epochs, rng);
    FilterReport report;
    const auto kept = filter_consistent(samples, tagger, cfg.filter_dedup, &gold, &report);

    Corpus corpus;
    for (const auto& s : kept) corpus.add(s.sentence);
    std::ofstream os(out, std::ios::binary);
    if (!os) throw DataError("cannot write '" + out + "'");
    write_conll(corpus, os, "");
    if (!report_path.empty()) io::write_file(report_path, report.to_text());
    std::cout << report.to_text();
    return 0;
}

int cmd_eval(const std::vector<std::string>& gold_args, const std::vector<std::string>& test_args,
             const std::string& aug_path, const std::string& seeds_arg, int epochs,
             const std::string& out_tsv) {
    const Corpus gold = load_labeled(gold_args, "--gold");
    const Corpus test = load_labeled(test_args, "--test");
    const Corpus augmented =
        aug_path.empty() ? Corpus{} : parse_conll(io::read_file(aug_path), "");
    const auto table = compare_runs(gold, augmented, test, parse_seed_list(seeds_arg), epochs);
    std::cout << table.to_text();
    if (!out_tsv.empty()) io::write_file(out_tsv, table.to_tsv());
    return 0;
}

int cmd_stats(const std::vector<std::string>& oracle_args,
              const std::vector<std::string>& dataset_args, int epochs, uint64_t seed,
              const std::string& out_tsv) {
    const Corpus oracle_train = load_labeled(oracle_args, "--oracle");
    RandomStream rng(seed);
    const PerceptronTagger oracle = train_tagger(oracle_train, epochs, rng);

    std::vector<std::pair<std::string, Corpus>> datasets;
    for (const auto& arg : dataset_args) {
        const auto [name, path] = split_kv(arg, "--dataset");
        datasets.emplace_back(name, parse_conll(io::read_file(path), ""));
    }
    std::vector<std::pair<std::string, const Corpus*>> views;
    for (const auto& [name, corpus] : datasets) views.emplace_back(name, &corpus);
    const auto counts = unique_valid_entities(views, oracle);

    std::ostringstream tsv;
    tsv << "dataset\tunique_valid_entities\n";
    for (const auto& [name, count] : counts) {
        std::cout << name << "\t" << count << "\n";
        tsv << name << "\t" << count << "\n";
    }
    if (!out_tsv.empty()) io::write_file(out_tsv, tsv.str());
    return 0;
}

int cmd_pipeline(const PipelineConfig& cfg) {
    const PipelineResult result = run_pipeline(cfg);
    std::cout << "gold sentences      " << result.gold_sentences << "\n";
    if (result.codemixed_sentences > 0)
        std::cout << "code-mixed          " << result.codemixed_sentences << "\n";
    std::cout << "generated samples   " << result.generated_samples << "\n";
    std::cout << "kept after filter   " << result.kept_samples << "\n";
    if (result.skipped > 0) std::cout << "skipped sentences   " << result.skipped << "\n";
    std::cout << "output              " << result.output_path << "\n";
    std::cout << "manifest            " << result.manifest_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"masked-entity language-model data augmentation for NER corpora"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate the bundled synthetic benchmark corpus");
    std::string synth_dir = "synth";
    uint64_t synth_seed = 7;
    std::size_t synth_train = 80, synth_test = 150, synth_full = 400;
    synth->add_option("--out-dir", synth_dir, "output directory");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--train", synth_train, "train sentences per language");
    synth->add_option("--test", synth_test, "test sentences per language");
    synth->add_option("--full", synth_full, "oracle-split sentences per language");

    // split
    auto* split = app.add_subcommand("split", "sample a low-resource split from a corpus");
    std::string split_in, split_lang = "en", split_out;
    std::size_t split_n = 100;
    uint64_t split_seed = 0;
    split->add_option("--in", split_in, "input CoNLL file")->required();
    split->add_option("--lang", split_lang, "language id of the corpus");
    split->add_option("--n", split_n, "sentences to sample")->required();
    split->add_option("--seed", split_seed, "sampling seed");
    split->add_option("--out", split_out, "output CoNLL file")->required();

    // codemix
    auto* codemix = app.add_subcommand("codemix", "create code-mixed sentences across languages");
    ConfigArgs codemix_cfg;
    std::string codemix_out;
    add_config_options(codemix, codemix_cfg, true);
    codemix->add_option("--out", codemix_out, "output CoNLL file")->required();

    // train-mlm
    auto* train = app.add_subcommand("train-mlm", "fine-tune the masked LM on entity-masked data");
    ConfigArgs train_cfg;
    std::vector<std::string> train_extra;
    std::string train_out;
    add_config_options(train, train_cfg, true);
    train->add_option("--extra", train_extra, "extra CoNLL files to include (e.g. code-mixed)");
    train->add_option("--out", train_out, "checkpoint path")->required();

    // augment
    auto* aug = app.add_subcommand("augment", "generate augmented sentences from a checkpoint");
    ConfigArgs aug_cfg;
    std::vector<std::string> aug_extra;
    std::string aug_model, aug_out, aug_prov;
    add_config_options(aug, aug_cfg, true);
    aug->add_option("--model", aug_model, "model checkpoint")->required();
    aug->add_option("--extra", aug_extra, "extra CoNLL files to augment alongside the train data");
    aug->add_option("--out", aug_out, "output CoNLL file")->required();
    aug->add_option("--provenance", aug_prov, "provenance sidecar (TSV)");

    // filter
    auto* filter = app.add_subcommand("filter", "keep label-consistent augmented sentences");
    ConfigArgs filter_cfg;
    std::string filter_in, filter_out, filter_report;
    add_config_options(filter, filter_cfg, true);
    filter->add_option("--in", filter_in, "augmented CoNLL file")->required();
    filter->add_option("--out", filter_out, "output CoNLL file")->required();
    filter->add_option("--report", filter_report, "filter report path");

    // eval
    auto* eval = app.add_subcommand("eval", "compare gold-only vs gold+augmented taggers");
    std::vector<std::string> eval_gold, eval_test;
    std::string eval_aug, eval_seeds = "1,2,3", eval_tsv;
    int eval_epochs = 5;
    eval->add_option("--gold", eval_gold, "gold corpus as lang=path")->required();
    eval->add_option("--test", eval_test, "test corpus as lang=path")->required();
    eval->add_option("--aug", eval_aug, "augmented CoNLL file");
    eval->add_option("--seeds", eval_seeds, "comma-separated training seeds");
    eval->add_option("--epochs", eval_epochs, "tagger training epochs");
    eval->add_option("--out-tsv", eval_tsv, "write the table as TSV");

    // stats
    auto* stats = app.add_subcommand("stats", "count unique oracle-valid entities per dataset");
    std::vector<std::string> stats_oracle, stats_datasets;
    int stats_epochs = 10;
    uint64_t stats_seed = 1;
    std::string stats_tsv;
    stats->add_option("--oracle", stats_oracle, "oracle training corpus as lang=path")
        ->required();
    stats->add_option("--dataset", stats_datasets, "dataset to count as name=path")->required();
    stats->add_option("--epochs", stats_epochs, "oracle training epochs");
    stats->add_option("--seed", stats_seed, "oracle training seed");
    stats->add_option("--out-tsv", stats_tsv, "write counts as TSV");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "run the full augmentation pipeline");
    ConfigArgs pipeline_cfg;
    add_config_options(pipeline, pipeline_cfg, true);

    try {
        app.parse(argc, argv);
        if (synth->parsed())
            return cmd_synth(synth_dir, synth_seed, synth_train, synth_test, synth_full);
        if (split->parsed())
            return cmd_split(split_in, split_lang, split_n, split_seed, split_out);
        if (codemix->parsed()) return cmd_codemix(codemix_cfg.resolve(), codemix_out);
        if (train->parsed()) return cmd_train_mlm(train_cfg.resolve(), train_extra, train_out);
        if (aug->parsed())
            return cmd_augment(aug_cfg.resolve(), aug_model, aug_extra, aug_out, aug_prov);
        if (filter->parsed())
            return cmd_filter(filter_cfg.resolve(), filter_in, filter_out, filter_report);
        if (eval->parsed())
            return cmd_eval(eval_gold, eval_test, eval_aug, eval_seeds, eval_epochs, eval_tsv);
        if (stats->parsed())
            return cmd_stats(stats_oracle, stats_datasets, stats_epochs, stats_seed, stats_tsv);
        if (pipeline->parsed()) return cmd_pipeline(pipeline_cfg.resolve());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
