#include "propdet/config.hpp"
#include "propdet/corpus.hpp"
#include "propdet/inference.hpp"
#include "propdet/metrics.hpp"
#include "propdet/model.hpp"
#include "propdet/report.hpp"
#include "propdet/synth.hpp"
#include "propdet/trainer.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace propdet;

namespace {

struct CommonArgs {
    std::string articles;
    std::string labels;
    std::string catalog;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<bool> use_logic;
    std::optional<bool> use_def;
    std::optional<double> slc_threshold;
    std::optional<double> flc_threshold;
    bool force = false;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--articles", args.articles, "Directory of article<id>.txt files");
    cmd->add_option("--labels", args.labels, "Gold labels TSV (doc_id, technique, begin, end)");
    cmd->add_option("--catalog", args.catalog, "Technique catalog file (name<TAB>definition)");
    cmd->add_option("--config", args.config, "JSON config file");
    cmd->add_option("--seed", args.seed, "Run seed (overrides config)");
    cmd->add_option("--out", args.out, "Output directory (not overwritten without --force)");
    cmd->add_option("--use-logic", args.use_logic,
                    "false zeroes the logic loss weight (ablation)");
    cmd->add_option("--use-def", args.use_def,
                    "false zeroes the definition loss weight (ablation)");
    cmd->add_option("--slc-threshold", args.slc_threshold, "Sentence-level decision threshold");
    cmd->add_option("--flc-threshold", args.flc_threshold, "Technique gate threshold");
    cmd->add_flag("--force", args.force, "Allow writing into an existing output directory");
}

TechniqueCatalog resolve_catalog(const CommonArgs& args) {
    if (!args.catalog.empty()) return load_catalog(args.catalog);
    return default_catalog();
}

TrainConfig resolve_train_config(const CommonArgs& args) {
    TrainConfig cfg;
    if (!args.config.empty()) apply_json(cfg, load_json(args.config));
    if (args.seed) cfg.seed = *args.seed;
    if (args.use_logic && !*args.use_logic) cfg.weights.gamma = 0.0;
    if (args.use_def && !*args.use_def) cfg.weights.lambda = 0.0;
    if (args.slc_threshold) cfg.thresholds.slc_threshold = *args.slc_threshold;
    if (args.flc_threshold) cfg.thresholds.flc_threshold = *args.flc_threshold;
    return cfg;
}

fs::path prepare_out_dir(const CommonArgs& args) {
    if (args.out.empty()) throw std::runtime_error("--out is required for this command");
    fs::path dir(args.out);
    if (fs::exists(dir) && !args.force)
        throw std::runtime_error("output directory exists (use --force): " + dir.string());
    fs::create_directories(dir);
    return dir;
}

Json input_checksums(const CommonArgs& args) {
    Json inputs = Json::object();
    if (!args.articles.empty()) inputs["articles"] = checksum_articles_dir(args.articles);
    if (!args.labels.empty()) inputs["labels"] = checksum_file(args.labels);
    if (!args.catalog.empty()) inputs["catalog"] = checksum_file(args.catalog);
    return inputs;
}

void write_manifest(const fs::path& dir, const std::string& command, const Json& config,
                    const Json& inputs, const std::vector<std::string>& outputs) {
    Json manifest{{"command", command},
                  {"version", kToolVersion},
                  {"config", config},
                  {"inputs", inputs},
                  {"outputs", outputs}};
    write_json(manifest, dir / "manifest.json");
}

// Deterministic document-level split when no explicit dev corpus is given.
void split_train_dev(const std::vector<Document>& documents, const std::vector<Fragment>& fragments,
                     double dev_fraction, std::uint64_t seed, std::vector<SentenceExample>& train,
                     std::vector<SentenceExample>& dev, std::vector<Fragment>& dev_gold) {
    std::vector<std::size_t> order(documents.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed ^ 0xd1b54a32d192ed03ull);
    rng.shuffle(order);
    const auto dev_docs = static_cast<std::size_t>(
        static_cast<double>(documents.size()) * dev_fraction);
    std::vector<bool> is_dev(documents.size(), false);
    for (std::size_t i = 0; i < dev_docs; ++i) is_dev[order[i]] = true;
    for (std::size_t i = 0; i < documents.size(); ++i) {
        auto split = sentence_split_and_align(documents[i], fragments);
        auto& target = is_dev[i] ? dev : train;
        for (auto& ex : split.sentences) target.push_back(std::move(ex));
        if (is_dev[i])
            for (const auto& frag : fragments)
                if (frag.doc_id == documents[i].id) dev_gold.push_back(frag);
    }
}

int cmd_train(const CommonArgs& args, const std::string& dev_articles,
              const std::string& dev_labels, double dev_fraction) {
    const TechniqueCatalog catalog = resolve_catalog(args);
    const TrainConfig cfg = resolve_train_config(args);
    const fs::path out = prepare_out_dir(args);

    auto [documents, fragments] = load_corpus(args.articles, args.labels, catalog);
    std::vector<SentenceExample> train_sents, dev_sents;
    std::vector<Fragment> dev_gold;
    if (!dev_articles.empty()) {
        auto [dev_docs, dev_frags] = load_corpus(dev_articles, dev_labels, catalog);
        train_sents = split_corpus(documents, fragments);
        dev_sents = split_corpus(dev_docs, dev_frags);
        dev_gold = dev_frags;
    } else {
        split_train_dev(documents, fragments, dev_fraction, cfg.seed, train_sents, dev_sents,
                        dev_gold);
    }
    std::cout << "training on " << train_sents.size() << " sentences, " << dev_sents.size()
              << " dev sentences\n";

    TrainResult result = train(train_sents, dev_sents, dev_gold, catalog, cfg);
    save_checkpoint(result.model, out / "checkpoint.bin");
    write_json(to_json(result.report), out / "train_report.json");

    std::vector<std::string> outputs{"checkpoint.bin", "train_report.json"};
    if (!dev_sents.empty()) {
        const ScoreReport dev = evaluate_model(result.model, dev_sents, dev_gold, cfg.thresholds);
        write_json(to_json(dev, catalog), out / "dev_scores.json");
        std::ofstream table(out / "dev_scores.txt");
        table << render_score_table(dev, catalog);
        outputs.push_back("dev_scores.json");
        outputs.push_back("dev_scores.txt");
        std::cout << render_score_table(dev, catalog, false);
    }
    std::cout << "best epoch " << result.report.best_epoch << " (" << result.report.stop_reason
              << ")\n";
    write_manifest(out, "train", to_json(cfg), input_checksums(args), outputs);
    return 0;
}

int cmd_predict(const CommonArgs& args, const std::string& checkpoint) {
    const TechniqueCatalog catalog = resolve_catalog(args);
    const fs::path out = prepare_out_dir(args);
    DecodeThresholds thresholds;
    if (!args.config.empty()) {
        TrainConfig cfg;
        apply_json(cfg, load_json(args.config));
        thresholds = cfg.thresholds;
    }
    if (args.slc_threshold) thresholds.slc_threshold = *args.slc_threshold;
    if (args.flc_threshold) thresholds.flc_threshold = *args.flc_threshold;

    Model model = load_checkpoint(checkpoint);
    const std::vector<Document> documents = load_articles(args.articles);

    std::vector<Fragment> predicted;
    std::ofstream slc_out(out / "slc_predictions.tsv");
    for (const auto& doc : documents) {
        auto split = sentence_split_and_align(doc, {});
        for (const auto& example : split.sentences) {
            const ModelOutput output = run_model(model, example);
            const SentencePrediction pred = decode(output, example, thresholds);
            for (const auto& frag : pred.fragments) predicted.push_back(frag);
            slc_out << doc.id << '\t' << example.sent_begin << '\t' << example.sent_end << '\t'
                    << (pred.slc ? 1 : 0) << '\n';
        }
    }
    save_labels(predicted, catalog, out / "predictions.tsv");
    write_manifest(out, "predict",
                   Json{{"checkpoint", checkpoint},
                        {"decode",
                         {{"slc_threshold", thresholds.slc_threshold},
                          {"flc_threshold", thresholds.flc_threshold}}}},
                   input_checksums(args), {"predictions.tsv", "slc_predictions.tsv"});
    std::cout << "wrote " << predicted.size() << " predicted fragments\n";
    return 0;
}

int cmd_score(const CommonArgs& args, const std::string& predictions,
              const std::string& slc_predictions) {
    const TechniqueCatalog catalog = resolve_catalog(args);
    auto [documents, gold] = load_corpus(args.articles, args.labels, catalog);
    auto [documents2, predicted] = load_corpus(args.articles, predictions, catalog);
    (void)documents2;

    ScoreReport report;
    report.spans = score_flc(predicted, gold, FlcMode::kSpans);
    report.full = score_flc(predicted, gold, FlcMode::kFull);
    report.per_technique = score_flc_per_technique(predicted, gold);

    // sentence-level and token-level views need the sentence segmentation
    std::vector<bool> slc_pred, slc_gold;
    std::vector<std::vector<int>> pred_tokens, gold_tokens;
    std::vector<std::set<int>> y_c, y_t;
    std::map<std::pair<std::string, std::int64_t>, bool> slc_file;
    if (!slc_predictions.empty()) {
        std::ifstream in(slc_predictions);
        if (!in) throw std::runtime_error("cannot open " + slc_predictions);
        std::string doc_id;
        std::int64_t begin, end;
        int label;
        while (in >> doc_id >> begin >> end >> label) slc_file[{doc_id, begin}] = label != 0;
    }
    for (const auto& doc : documents) {
        auto gold_split = sentence_split_and_align(doc, gold);
        auto pred_split = sentence_split_and_align(doc, predicted);
        for (std::size_t s = 0; s < gold_split.sentences.size(); ++s) {
            const auto& gs = gold_split.sentences[s];
            const auto& ps = pred_split.sentences[s];
            slc_gold.push_back(gs.sentence_labels[0] != 0);
            if (!slc_predictions.empty()) {
                auto it = slc_file.find({doc.id, gs.sent_begin});
                slc_pred.push_back(it != slc_file.end() && it->second);
            } else {
                slc_pred.push_back(ps.sentence_labels[0] != 0);
            }
            gold_tokens.push_back(gs.token_labels);
            pred_tokens.push_back(ps.token_labels);
            std::set<int> yc, yt;
            for (int k = 1; k < kNumClasses; ++k)
                if (ps.sentence_labels[k]) yc.insert(k);
            for (int label : ps.token_labels)
                if (label > 0) yt.insert(label);
            y_c.push_back(std::move(yc));
            y_t.push_back(std::move(yt));
        }
    }
    report.slc = score_slc(slc_pred, slc_gold);
    report.confusion = confusion_matrix(pred_tokens, gold_tokens);
    report.consistency_gated = consistency_metric(y_c, y_t);
    report.consistency_ungated = report.consistency_gated;

    std::cout << render_score_table(report, catalog);
    if (!args.out.empty()) {
        const fs::path out = prepare_out_dir(args);
        write_json(to_json(report, catalog), out / "scores.json");
        std::ofstream csv(out / "confusion.csv");
        csv << render_confusion_csv(report.confusion, catalog);
        write_manifest(out, "score", Json{{"predictions", predictions}}, input_checksums(args),
                       {"scores.json", "confusion.csv"});
    }
    return 0;
}

int cmd_stats(const CommonArgs& args) {
    const TechniqueCatalog catalog = resolve_catalog(args);
    std::vector<Fragment> fragments;
    if (!args.articles.empty()) {
        auto [documents, frags] = load_corpus(args.articles, args.labels, catalog);
        (void)documents;
        fragments = std::move(frags);
    } else {
        // offsets cannot be validated without the articles
        std::ifstream in(args.labels);
        if (!in) throw std::runtime_error("cannot open labels file: " + args.labels);
        std::string line;
        std::size_t row = 0;
        while (std::getline(in, line)) {
            ++row;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::vector<std::string> cols;
            std::size_t pos = 0;
            while (true) {
                auto tab = line.find('\t', pos);
                if (tab == std::string::npos) {
                    cols.push_back(line.substr(pos));
                    break;
                }
                cols.push_back(line.substr(pos, tab - pos));
                pos = tab + 1;
            }
            if (cols.size() != 4)
                throw CorpusError("labels row " + std::to_string(row) + ": expected 4 columns");
            auto technique = catalog.resolve(cols[1]);
            if (!technique)
                throw CorpusError("labels row " + std::to_string(row) + ": unknown technique '" +
                                  cols[1] + "'");
            Fragment frag;
            frag.doc_id = cols[0];
            frag.technique = *technique;
            frag.begin = 0;
            frag.end = 1;
            fragments.push_back(std::move(frag));
        }
    }
    const CorpusStatistics stats = corpus_statistics(fragments);
    std::cout << render_stats_table(stats, catalog);
    if (!args.out.empty()) {
        const fs::path out = prepare_out_dir(args);
        Json counts = Json::object();
        for (int k = 0; k < kNumTechniques; ++k)
            counts[catalog.name(k)] = stats.counts[static_cast<std::size_t>(k)];
        counts["Total"] = stats.total;
        write_json(counts, out / "stats.json");
        write_manifest(out, "stats", Json::object(), input_checksums(args), {"stats.json"});
    }
    return 0;
}

int cmd_gradcheck(const CommonArgs& args, int hidden_dim, int tokens, int batch_size,
                  double tolerance) {
    TrainConfig cfg = resolve_train_config(args);
    const std::uint64_t seed = args.seed.value_or(cfg.seed);
    const TechniqueCatalog catalog = resolve_catalog(args);

    std::vector<std::string> vocab_tokens{"<pad>", "<unk>"};
    for (int i = 0; i < 10; ++i) vocab_tokens.push_back("tok" + std::to_string(i));
    Model model = Model::init(Vocabulary::from_tokens(vocab_tokens), hidden_dim,
                              std::max(tokens, 8), seed, cfg.def_mode);
    const auto def_ids = model.definition_ids(catalog);

    Rng rng(seed ^ 0xabcdef12345678ull);
    std::vector<BatchItem> batch;
    for (int b = 0; b < batch_size; ++b) {
        BatchItem item;
        for (int t = 0; t < tokens; ++t)
            item.token_ids.push_back(2 + static_cast<int>(rng.below(10)));
        for (int t = 0; t < tokens; ++t)
            item.token_labels.push_back(static_cast<int>(rng.below(kNumClasses)));
        item.sentence_labels.fill(0);
        for (int label : item.token_labels)
            if (label > 0) item.sentence_labels[label] = 1;
        for (int k = 1; k < kNumClasses; ++k)
            if (item.sentence_labels[k]) item.sentence_labels[0] = 1;
        batch.push_back(std::move(item));
    }

    const GradCheckReport report = gradient_check(model, batch, def_ids, cfg.weights, tolerance);
    std::printf("%-28s %14s %14s\n", "tensor", "max_rel_err", "max_abs_diff");
    for (const auto& t : report.tensors) {
        if (t.skipped)
            std::printf("%-28s %14s %14s\n", t.name.c_str(), "skipped", "-");
        else
            std::printf("%-28s %14.3e %14.3e\n", t.name.c_str(), t.max_rel_err, t.max_abs_diff);
    }
    std::printf("max relative error %.3e (tolerance %.1e): %s\n", report.max_rel_err, tolerance,
                report.passed ? "PASS" : "FAIL");
    if (!args.out.empty()) {
        const fs::path out = prepare_out_dir(args);
        write_json(to_json(report), out / "gradcheck.json");
        write_manifest(out, "gradcheck", to_json(cfg), Json::object(), {"gradcheck.json"});
    }
    return report.passed ? 0 : 1;
}

int cmd_gen_synth(const CommonArgs& args, SynthConfig synth) {
    const TechniqueCatalog catalog = resolve_catalog(args);
    if (!args.config.empty()) apply_json(synth, load_json(args.config));
    if (args.seed) synth.seed = *args.seed;
    const fs::path out = prepare_out_dir(args);
    const SynthCorpus corpus = generate_synthetic_corpus(synth);
    write_synthetic_corpus(corpus, catalog, out);
    write_manifest(out, "gen-synth", to_json(synth), Json::object(),
                   {"articles", "labels.tsv", "catalog.tsv", "counts.tsv"});
    std::cout << "wrote " << corpus.documents.size() << " documents, " << corpus.fragments.size()
              << " fragments\n";
    return 0;
}

int cmd_consistency_exp(const CommonArgs& args, const std::string& dev_articles,
                        const std::string& dev_labels, int num_seeds, std::uint64_t seed_base,
                        double gamma_on) {
    const TechniqueCatalog catalog = resolve_catalog(args);
    const TrainConfig base = resolve_train_config(args);
    const fs::path out = prepare_out_dir(args);

    auto [train_docs, train_frags] = load_corpus(args.articles, args.labels, catalog);
    auto [dev_docs, dev_frags] = load_corpus(dev_articles, dev_labels, catalog);
    auto train_sents = split_corpus(train_docs, train_frags);
    auto dev_sents = split_corpus(dev_docs, dev_frags);

    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < num_seeds; ++i) seeds.push_back(seed_base + static_cast<std::uint64_t>(i));
    const auto runs =
        consistency_experiment(train_sents, dev_sents, dev_frags, catalog, base, seeds, gamma_on);

    int wins = 0;
    Json rows = Json::array();
    std::printf("%10s %14s %14s\n", "seed", "m_c(gamma=0)", "m_c(gamma>0)");
    for (const auto& run : runs) {
        wins += run.m_c_gamma_on >= run.m_c_gamma_zero;
        std::printf("%10llu %14.4f %14.4f\n", static_cast<unsigned long long>(run.seed),
                    run.m_c_gamma_zero, run.m_c_gamma_on);
        rows.push_back(Json{{"seed", run.seed},
                            {"m_c_gamma_zero", run.m_c_gamma_zero},
                            {"m_c_gamma_on", run.m_c_gamma_on}});
    }
    std::printf("m_c(gamma>0) >= m_c(gamma=0) in %d of %d seeds\n", wins, num_seeds);
    write_json(Json{{"gamma_on", gamma_on}, {"runs", rows}, {"wins", wins}},
               out / "consistency_experiment.json");
    write_manifest(out, "consistency-exp", to_json(base), input_checksums(args),
                   {"consistency_experiment.json"});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fine-grained propaganda span detection toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string dev_articles, dev_labels, checkpoint, predictions, slc_predictions;
    double dev_fraction = 0.2;
    int hidden_dim = 4, tokens = 5, batch_size = 2;
    double tolerance = 1e-3;
    int num_seeds = 10;
    std::uint64_t seed_base = 100;
    double gamma_on = 0.01;
    SynthConfig synth;

    auto* train_cmd = app.add_subcommand("train", "Train a model");
    add_common_flags(train_cmd, args);
    train_cmd->add_option("--dev-articles", dev_articles, "Explicit dev articles directory");
    train_cmd->add_option("--dev-labels", dev_labels, "Explicit dev labels TSV");
    train_cmd->add_option("--dev-fraction", dev_fraction,
                          "Fraction of documents held out when no explicit dev corpus is given");

    auto* predict_cmd = app.add_subcommand("predict", "Run constrained decoding");
    add_common_flags(predict_cmd, args);
    predict_cmd->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();

    auto* score_cmd = app.add_subcommand("score", "Score a predictions file against gold labels");
    add_common_flags(score_cmd, args);
    score_cmd->add_option("--predictions", predictions, "Predicted fragments TSV")->required();
    score_cmd->add_option("--slc-predictions", slc_predictions,
                          "Optional sentence-level predictions TSV");

    auto* stats_cmd = app.add_subcommand("stats", "Per-technique instance counts");
    add_common_flags(stats_cmd, args);

    auto* grad_cmd = app.add_subcommand("gradcheck", "Verify analytic gradients");
    add_common_flags(grad_cmd, args);
    grad_cmd->add_option("--hidden-dim", hidden_dim, "Model width for the check");
    grad_cmd->add_option("--tokens", tokens, "Tokens per example");
    grad_cmd->add_option("--batch", batch_size, "Examples per batch");
    grad_cmd->add_option("--tolerance", tolerance, "Max relative error");

    auto* synth_cmd = app.add_subcommand("gen-synth", "Generate a synthetic corpus");
    add_common_flags(synth_cmd, args);
    synth_cmd->add_option("--docs", synth.num_docs, "Number of documents");
    synth_cmd->add_option("--sentences-per-doc", synth.sentences_per_doc, "Sentences per document");
    synth_cmd->add_option("--min-tokens", synth.min_tokens, "Min filler tokens per sentence");
    synth_cmd->add_option("--max-tokens", synth.max_tokens, "Max filler tokens per sentence");
    synth_cmd->add_option("--vocab-size", synth.vocab_size, "Filler vocabulary size");
    synth_cmd->add_option("--marker-len", synth.marker_len, "Marker phrase length in tokens");
    synth_cmd->add_option("--technique-rate", synth.technique_rate,
                          "P(sentence carries a fragment)");
    synth_cmd->add_option("--second-marker-rate", synth.second_marker_rate,
                          "P(marked sentence carries a second fragment)");
    synth_cmd->add_option("--marker-noise", synth.marker_noise, "Marker degradation probability");
    synth_cmd->add_option("--span-slop", synth.span_slop_rate,
                          "P(gold span swallows an adjacent filler, per side)");
    synth_cmd->add_flag("--ambiguous-pairs", synth.ambiguous_pair_spans,
                        "Pair-shared span tokens with out-of-span cue words");

    auto* cons_cmd = app.add_subcommand("consistency-exp",
                                        "Paired gamma=0 vs gamma>0 consistency runs");
    add_common_flags(cons_cmd, args);
    cons_cmd->add_option("--dev-articles", dev_articles, "Dev articles directory")->required();
    cons_cmd->add_option("--dev-labels", dev_labels, "Dev labels TSV")->required();
    cons_cmd->add_option("--seeds", num_seeds, "Number of paired runs");
    cons_cmd->add_option("--seed-base", seed_base, "First seed; runs use seed_base..seed_base+n-1");
    cons_cmd->add_option("--gamma-on", gamma_on, "Logic weight for the gamma>0 arm");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(args, dev_articles, dev_labels, dev_fraction);
        if (predict_cmd->parsed()) return cmd_predict(args, checkpoint);
        if (score_cmd->parsed()) return cmd_score(args, predictions, slc_predictions);
        if (stats_cmd->parsed()) return cmd_stats(args);
        if (grad_cmd->parsed())
            return cmd_gradcheck(args, hidden_dim, tokens, batch_size, tolerance);
        if (synth_cmd->parsed()) return cmd_gen_synth(args, synth);
        if (cons_cmd->parsed())
            return cmd_consistency_exp(args, dev_articles, dev_labels, num_seeds, seed_base,
                                       gamma_on);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
