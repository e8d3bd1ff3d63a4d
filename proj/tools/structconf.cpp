// Command line front end: synthetic corpora, training, prediction,
// confidence scoring, evaluation, bounds, tradeoff sweeps, active learning,
// and hyperparameter tuning over CoNLL-style files.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "structconf/applications.hpp"
#include "structconf/confidence.hpp"
#include "structconf/corpus.hpp"
#include "structconf/evaluation.hpp"
#include "structconf/learners.hpp"
#include "structconf/model_io.hpp"
#include "structconf/report.hpp"

using namespace structconf;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 0;
    std::string format = "csv";
    std::string output;  // empty = stdout

    ReportFormat report_format() const {
        return format == "json" ? ReportFormat::json : ReportFormat::csv;
    }
};

void emit(const Table& table, const GlobalOpts& g) {
    if (g.output.empty()) {
        table.write(std::cout, g.report_format());
        return;
    }
    std::ofstream out(g.output);
    if (!out) throw ParseError("cannot open " + g.output + " for writing");
    table.write(out, g.report_format());
}

ConfidenceMethod parse_method(const std::string& name) {
    static const std::map<std::string, ConfidenceMethod> methods{
        {"delta", ConfidenceMethod::delta},
        {"gamma", ConfidenceMethod::gamma},
        {"kb", ConfidenceMethod::kb},
        {"wkb", ConfidenceMethod::wkb},
        {"kd-fix", ConfidenceMethod::kd_fix},
        {"kd-pc", ConfidenceMethod::kd_pc},
        {"kd-fix+delta", ConfidenceMethod::kd_fix_plus_delta}};
    auto it = methods.find(name);
    if (it == methods.end()) throw ConfigError("unknown confidence method: " + name);
    return it->second;
}

Algorithm parse_algorithm(const std::string& name) {
    static const std::map<std::string, Algorithm> algos{
        {"perceptron", Algorithm::perceptron},
        {"pa", Algorithm::pa},
        {"cw", Algorithm::cw},
        {"nbest-pa", Algorithm::nbest_pa}};
    auto it = algos.find(name);
    if (it == algos.end()) throw ConfigError("unknown algorithm: " + name);
    return it->second;
}

TagSet tags_from_corpus(const std::vector<RawSentence>& sentences) {
    std::set<std::string> types;
    for (const auto& sent : sentences)
        for (const auto& tok : sent.tokens)
            if (tok.tag.size() >= 3 && (tok.tag[0] == 'B' || tok.tag[0] == 'I'))
                types.insert(tok.tag.substr(2));
    return TagSet{{types.begin(), types.end()}};
}

std::vector<ChainInstance> chain_instances(const std::vector<RawSentence>& raw,
                                           const TagSet& tags, FeatureIndex& index) {
    std::vector<ChainInstance> out;
    out.reserve(raw.size());
    for (const auto& sent : raw)
        out.push_back(extract_chain_features(sent, tags, index));
    return out;
}

std::vector<TreeInstance> tree_instances(const std::vector<RawSentence>& raw,
                                         FeatureIndex& index) {
    std::vector<TreeInstance> out;
    out.reserve(raw.size());
    for (const auto& sent : raw) out.push_back(extract_tree_features(sent, index));
    return out;
}

struct ConfidenceOpts {
    std::string method = "delta";
    int K = 50;
    double s = 0.1;
    double c = 1.0;
    double a = 0.99;

    ConfidenceConfig config(std::uint64_t seed) const {
        ConfidenceConfig cfg;
        cfg.method = parse_method(method);
        cfg.K = K;
        cfg.s = s;
        cfg.c = c;
        cfg.a = a;
        cfg.seed = seed;
        return cfg;
    }
};

void add_confidence_opts(CLI::App* cmd, ConfidenceOpts& opts) {
    cmd->add_option("--method", opts.method,
                    "delta|gamma|kb|wkb|kd-fix|kd-pc|kd-fix+delta");
    cmd->add_option("--K", opts.K, "number of alternatives");
    cmd->add_option("--s", opts.s, "sampling scale");
    cmd->add_option("--c", opts.c, "marginal temperature");
    cmd->add_option("--a", opts.a, "combo weight");
}

template <class Instance>
std::vector<std::vector<ConfidenceAnnotation>> scored_for(
    const std::vector<Instance>& instances, const ModelFile& mf,
    const ConfidenceConfig& cfg) {
    return score_batch(instances, mf.model, cfg);
}

Table annotation_table(const std::vector<std::vector<ConfidenceAnnotation>>& scored,
                       bool chain, const TagSet& tags) {
    Table t;
    t.columns = {"sentence", "unit", "predicted", "nu", "correct"};
    for (std::size_t i = 0; i < scored.size(); ++i)
        for (const auto& a : scored[i]) {
            const std::string pred =
                chain ? tags.tag_name(a.predicted) : std::to_string(a.predicted);
            t.add_row({std::to_string(i), std::to_string(a.unit), pred,
                       format_double(a.nu),
                       a.correct ? (*a.correct ? "1" : "0") : ""});
        }
    return t;
}

int run(int argc, char** argv) {
    CLI::App app{"structured prediction with per-unit confidence"};
    app.require_subcommand(1);
    GlobalOpts g;
    app.add_option("--seed", g.seed, "global random seed");
    app.add_option("--format", g.format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--output", g.output, "report file (default stdout)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    SynthConfig synth_cfg;
    std::string synth_mode = "chain", synth_out;
    synth->add_option("--mode", synth_mode, "chain|tree")
        ->check(CLI::IsMember({"chain", "tree"}));
    synth->add_option("--train", synth_cfg.n_train, "training sentences");
    synth->add_option("--dev", synth_cfg.n_dev, "dev sentences");
    synth->add_option("--test", synth_cfg.n_test, "test sentences");
    synth->add_option("--min-len", synth_cfg.min_len, "minimum length");
    synth->add_option("--max-len", synth_cfg.max_len, "maximum length");
    synth->add_option("--types", synth_cfg.entity_types, "entity types (chain)");
    synth->add_option("--words-per-label", synth_cfg.words_per_label,
                      "vocabulary block size (chain)");
    synth->add_option("--vocab", synth_cfg.vocabulary, "vocabulary (tree)");
    synth->add_option("--noise", synth_cfg.noise, "emission noise in [0,1]");
    synth->add_option("--out", synth_out, "output directory")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train a linear model");
    std::string train_task = "chain", train_input, train_model_path, train_algo = "pa";
    TrainConfig train_cfg;
    train_cmd->add_option("--task", train_task, "chain|tree")
        ->check(CLI::IsMember({"chain", "tree"}));
    train_cmd->add_option("--input", train_input, "training corpus")->required();
    train_cmd->add_option("--model", train_model_path, "model output path")->required();
    train_cmd->add_option("--algo", train_algo, "perceptron|pa|cw|nbest-pa");
    train_cmd->add_option("--C", train_cfg.C, "PA aggressiveness");
    train_cmd->add_option("--phi", train_cfg.phi, "CW confidence parameter");
    train_cmd->add_option("--init-variance", train_cfg.a, "CW initial variance");
    train_cmd->add_option("--nbest-k", train_cfg.nbest_k, "n-best list size");
    train_cmd->add_option("--epochs", train_cfg.epochs, "training epochs");

    // predict
    auto* predict = app.add_subcommand("predict", "decode a corpus");
    std::string pr_task = "chain", pr_input, pr_model, pr_out;
    bool pr_final = false;
    predict->add_option("--task", pr_task, "chain|tree")
        ->check(CLI::IsMember({"chain", "tree"}));
    predict->add_option("--input", pr_input, "corpus")->required();
    predict->add_option("--model", pr_model, "model file")->required();
    predict->add_option("--out", pr_out, "predictions file")->required();
    predict->add_flag("--final-weights", pr_final,
                      "use final instead of averaged weights");

    // confidence
    auto* conf = app.add_subcommand("confidence", "per-unit confidence records");
    std::string cf_task = "chain", cf_input, cf_model;
    ConfidenceOpts cf_opts;
    conf->add_option("--task", cf_task, "chain|tree")
        ->check(CLI::IsMember({"chain", "tree"}));
    conf->add_option("--input", cf_input, "corpus")->required();
    conf->add_option("--model", cf_model, "model file")->required();
    add_confidence_opts(conf, cf_opts);

    // eval-rank
    auto* rank = app.add_subcommand("eval-rank", "error-detection ranking metrics");
    std::string rk_task = "chain", rk_input, rk_model;
    ConfidenceOpts rk_opts;
    rank->add_option("--task", rk_task, "chain|tree")
        ->check(CLI::IsMember({"chain", "tree"}));
    rank->add_option("--input", rk_input, "corpus with gold")->required();
    rank->add_option("--model", rk_model, "model file")->required();
    add_confidence_opts(rank, rk_opts);

    // eval-calib
    auto* calib = app.add_subcommand("eval-calib", "calibration bins and RMSE");
    std::string cb_task = "chain", cb_input, cb_model;
    ConfidenceOpts cb_opts;
    cb_opts.method = "kd-fix";
    calib->add_option("--task", cb_task, "chain|tree")
        ->check(CLI::IsMember({"chain", "tree"}));
    calib->add_option("--input", cb_input, "corpus with gold")->required();
    calib->add_option("--model", cb_model, "model file")->required();
    add_confidence_opts(calib, cb_opts);

    // bounds
    auto* bounds = app.add_subcommand("bounds", "sample-size bound calculators");
    bool b_chernoff = false, b_bernstein = false;
    double b_eps = 0.05, b_delta = 0.05, b_gamma = 0.5;
    long b_n = 0, b_k = 50;
    bounds->add_flag("--chernoff", b_chernoff, "uniform Chernoff bound on K");
    bounds->add_flag("--bernstein", b_bernstein, "Bernstein interval width");
    bounds->add_option("--eps", b_eps, "accuracy epsilon");
    bounds->add_option("--delta", b_delta, "failure probability");
    bounds->add_option("--n", b_n, "number of units")->required();
    bounds->add_option("--gamma", b_gamma, "per-unit accuracy");
    bounds->add_option("--k", b_k, "number of draws");

    // tradeoff
    auto* tradeoff = app.add_subcommand("tradeoff", "precision-recall trading sweep");
    std::string td_input, td_model, td_direction = "precision";
    bool td_merge = false;
    int td_steps = 21;
    ConfidenceOpts td_opts;
    td_opts.method = "kd-fix";
    tradeoff->add_option("--input", td_input, "corpus with gold")->required();
    tradeoff->add_option("--model", td_model, "model file")->required();
    tradeoff->add_option("--direction", td_direction, "precision|recall")
        ->check(CLI::IsMember({"precision", "recall"}));
    tradeoff->add_flag("--merge", td_merge, "merge entity categories when scoring");
    tradeoff->add_option("--steps", td_steps, "thresholds across [0,1]");
    add_confidence_opts(tradeoff, td_opts);

    // active-learn
    auto* active = app.add_subcommand("active-learn", "pool-based selection protocol");
    std::string al_task = "chain", al_pool, al_test, al_algo = "pa";
    bool al_random = false;
    ActiveLearnConfig al_cfg;
    ConfidenceOpts al_opts;
    al_opts.method = "kd-fix";
    active->add_option("--task", al_task, "chain|tree")
        ->check(CLI::IsMember({"chain", "tree"}));
    active->add_option("--pool", al_pool, "unlabeled pool corpus")->required();
    active->add_option("--test", al_test, "held-out test corpus")->required();
    active->add_option("--initial", al_cfg.initial_labeled, "initial labeled size");
    active->add_option("--candidate", al_cfg.candidate_sample, "candidate sample");
    active->add_option("--batch", al_cfg.batch, "sentences per iteration");
    active->add_option("--stop", al_cfg.stop_at, "total labeled sentences");
    active->add_option("--eval-every", al_cfg.eval_every_sentences, "evaluation stride");
    active->add_option("--algo", al_algo, "perceptron|pa|cw|nbest-pa");
    active->add_option("--epochs", al_cfg.trainer.epochs, "epochs per retrain");
    active->add_flag("--random-selection", al_random, "uniform selection baseline");
    add_confidence_opts(active, al_opts);

    // tune
    auto* tune_cmd = app.add_subcommand("tune", "grid-search confidence parameters");
    std::string tn_task = "chain", tn_input, tn_model;
    ConfidenceOpts tn_opts;
    tn_opts.method = "kd-fix";
    tune_cmd->add_option("--task", tn_task, "chain|tree")
        ->check(CLI::IsMember({"chain", "tree"}));
    tune_cmd->add_option("--input", tn_input, "dev corpus with gold")->required();
    tune_cmd->add_option("--model", tn_model, "model file")->required();
    tune_cmd->add_option("--method", tn_opts.method,
                         "delta|gamma|kb|wkb|kd-fix|kd-pc|kd-fix+delta");

    // allow the global flags after the subcommand name as well
    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (synth->parsed()) {
        synth_cfg.mode = synth_mode == "tree" ? SynthMode::tree : SynthMode::chain;
        synth_cfg.seed = g.seed;
        auto corpus = generate_synthetic(synth_cfg);
        std::filesystem::create_directories(synth_out);
        const auto write = synth_cfg.mode == SynthMode::chain ? write_conll_chain
                                                              : write_conll_dependency;
        write(synth_out + "/train.conll", corpus.train);
        write(synth_out + "/dev.conll", corpus.dev);
        write(synth_out + "/test.conll", corpus.test);
        return 0;
    }

    if (train_cmd->parsed()) {
        train_cfg.algorithm = parse_algorithm(train_algo);
        train_cfg.seed = g.seed;
        FeatureIndex index;
        TagSet tags;
        LinearModel model;
        if (train_task == "chain") {
            auto raw = read_conll_chain(train_input);
            tags = tags_from_corpus(raw);
            auto data = chain_instances(raw, tags, index);
            model = train(data, index.size(), train_cfg);
        } else {
            auto raw = read_conll_dependency(train_input);
            auto data = tree_instances(raw, index);
            model = train(data, index.size(), train_cfg);
        }
        save_model(train_model_path, model, index, tags);
        return 0;
    }

    if (predict->parsed()) {
        auto mf = load_model(pr_model);
        const auto w = mf.model.prediction_weights(!pr_final);
        if (pr_task == "chain") {
            auto raw = read_conll_chain(pr_input);
            auto data = chain_instances(raw, mf.tags, mf.index);
            for (std::size_t i = 0; i < raw.size(); ++i) {
                const auto labels = decode(data[i], w);
                for (int p = 0; p < raw[i].length(); ++p)
                    raw[i].tokens[p].tag = mf.tags.tag_name(labels[p]);
            }
            write_conll_chain(pr_out, raw);
        } else {
            auto raw = read_conll_dependency(pr_input);
            auto data = tree_instances(raw, mf.index);
            for (std::size_t i = 0; i < raw.size(); ++i) {
                const auto heads = decode(data[i], w);
                for (int d = 1; d <= raw[i].length(); ++d)
                    raw[i].tokens[d - 1].head = heads[d - 1];
            }
            write_conll_dependency(pr_out, raw);
        }
        return 0;
    }

    if (conf->parsed()) {
        auto mf = load_model(cf_model);
        const auto cfg = cf_opts.config(g.seed);
        Table t;
        if (cf_task == "chain") {
            auto raw = read_conll_chain(cf_input);
            auto data = chain_instances(raw, mf.tags, mf.index);
            t = annotation_table(scored_for(data, mf, cfg), true, mf.tags);
        } else {
            auto raw = read_conll_dependency(cf_input);
            auto data = tree_instances(raw, mf.index);
            t = annotation_table(scored_for(data, mf, cfg), false, mf.tags);
        }
        emit(t, g);
        return 0;
    }

    if (rank->parsed()) {
        auto mf = load_model(rk_model);
        const auto cfg = rk_opts.config(g.seed);
        std::vector<RankedUnit> units;
        if (rk_task == "chain") {
            auto raw = read_conll_chain(rk_input);
            auto data = chain_instances(raw, mf.tags, mf.index);
            units = to_ranked_units(scored_for(data, mf, cfg));
        } else {
            auto raw = read_conll_dependency(rk_input);
            auto data = tree_instances(raw, mf.index);
            units = to_ranked_units(scored_for(data, mf, cfg));
        }
        Table t;
        t.columns = {"metric", "value"};
        t.add_row({"units", std::to_string(units.size())});
        t.add_row({"average_precision", format_double(average_precision(units))});
        for (const auto& [recall, precision] : precision_recall_curve(units))
            t.add_row({"precision_at_recall_" +
                           std::to_string(static_cast<int>(recall * 100.0 + 0.5)),
                       format_double(precision)});
        emit(t, g);
        return 0;
    }

    if (calib->parsed()) {
        auto mf = load_model(cb_model);
        const auto cfg = cb_opts.config(g.seed);
        std::vector<std::pair<double, bool>> scored;
        const auto gather = [&](const auto& batches) {
            for (const auto& sent : batches)
                for (const auto& a : sent) scored.emplace_back(a.nu, *a.correct);
        };
        if (cb_task == "chain") {
            auto raw = read_conll_chain(cb_input);
            auto data = chain_instances(raw, mf.tags, mf.index);
            gather(scored_for(data, mf, cfg));
        } else {
            auto raw = read_conll_dependency(cb_input);
            auto data = tree_instances(raw, mf.index);
            gather(scored_for(data, mf, cfg));
        }
        const auto bins = calibration_bins(scored);
        Table t;
        t.columns = {"bin", "center", "count", "correct", "value"};
        for (const auto& b : bins)
            t.add_row({std::to_string(b.index), format_double(b.center),
                       std::to_string(b.count), std::to_string(b.correct),
                       b.count ? format_double(b.accuracy()) : ""});
        t.add_row({"rmse", "", "", "", format_double(calibration_rmse(bins))});
        emit(t, g);
        return 0;
    }

    if (bounds->parsed()) {
        if (b_chernoff == b_bernstein)
            throw ConfigError("choose exactly one of --chernoff and --bernstein");
        Table t;
        t.columns = {"bound", "value"};
        if (b_chernoff)
            t.add_row({"chernoff_k", std::to_string(chernoff_k(b_eps, b_delta, b_n))});
        else
            t.add_row({"bernstein_epsilon",
                       format_double(bernstein_epsilon(b_gamma, b_k, b_n, b_delta))});
        emit(t, g);
        return 0;
    }

    if (tradeoff->parsed()) {
        auto mf = load_model(td_model);
        const auto cfg = td_opts.config(g.seed);
        auto raw = read_conll_chain(td_input);
        auto data = chain_instances(raw, mf.tags, mf.index);
        auto scored = scored_for(data, mf, cfg);
        std::vector<std::vector<int>> gold;
        for (const auto& x : data) gold.push_back(x.gold);
        const auto w = mf.model.prediction_weights(true);
        Table t;
        t.columns = {"t", "precision", "recall", "f1"};
        for (int step = 0; step < td_steps; ++step) {
            const double threshold =
                td_steps == 1 ? 0.0 : static_cast<double>(step) / (td_steps - 1);
            std::vector<std::vector<int>> revised;
            for (std::size_t i = 0; i < data.size(); ++i)
                revised.push_back(
                    td_direction == "precision"
                        ? apply_precision_tradeoff(mf.tags, scored[i], threshold)
                        : apply_recall_tradeoff(mf.tags, data[i], w, scored[i],
                                                threshold));
            const auto prf = entity_prf_corpus(mf.tags, gold, revised, td_merge);
            t.add_row({format_double(threshold), format_double(prf.precision),
                       format_double(prf.recall), format_double(prf.f1)});
        }
        emit(t, g);
        return 0;
    }

    if (active->parsed()) {
        al_cfg.trainer.algorithm = parse_algorithm(al_algo);
        al_cfg.scorer = al_opts.config(g.seed);
        al_cfg.random_selection = al_random;
        al_cfg.seed = g.seed;
        Table t;
        t.columns = {"sentences", "words", "metric"};
        const auto record = [&](const ActiveLearnResult& result) {
            for (const auto& pt : result.curve)
                t.add_row({std::to_string(pt.sentences_labeled),
                           std::to_string(pt.words_labeled),
                           format_double(pt.metric)});
        };
        if (al_task == "chain") {
            auto pool_raw = read_conll_chain(al_pool);
            auto test_raw = read_conll_chain(al_test);
            FeatureIndex index;
            TagSet tags = tags_from_corpus(pool_raw);
            auto pool = chain_instances(pool_raw, tags, index);
            index.freeze();
            auto test = chain_instances(test_raw, tags, index);
            std::vector<std::vector<int>> gold;
            for (const auto& x : test) gold.push_back(x.gold);
            const auto metric = [&](const LinearModel& m) {
                std::vector<std::vector<int>> pred;
                for (const auto& x : test)
                    pred.push_back(decode(x, m.prediction_weights(true)));
                return entity_prf_corpus(tags, gold, pred).f1;
            };
            record(active_learning_run<ChainInstance>(pool, index.size(), al_cfg, metric));
        } else {
            auto pool_raw = read_conll_dependency(al_pool);
            auto test_raw = read_conll_dependency(al_test);
            FeatureIndex index;
            auto pool = tree_instances(pool_raw, index);
            index.freeze();
            auto test = tree_instances(test_raw, index);
            const auto metric = [&](const LinearModel& m) {
                long ok = 0, total = 0;
                for (const auto& x : test) {
                    const auto heads = decode(x, m.prediction_weights(true));
                    total += x.length;
                    ok += x.length - hamming_loss(x.gold_heads, heads);
                }
                return static_cast<double>(ok) / static_cast<double>(total);
            };
            record(active_learning_run<TreeInstance>(pool, index.size(), al_cfg, metric));
        }
        emit(t, g);
        return 0;
    }

    if (tune_cmd->parsed()) {
        auto mf = load_model(tn_model);
        const auto method = parse_method(tn_opts.method);
        const auto grids = TuneGrids::defaults();
        ConfidenceConfig best;
        double ap = 0.0;
        if (tn_task == "chain") {
            auto raw = read_conll_chain(tn_input);
            auto data = chain_instances(raw, mf.tags, mf.index);
            best = tune(data, mf.model, method, grids, g.seed);
            ap = average_precision(to_ranked_units(score_batch(data, mf.model, best)));
        } else {
            auto raw = read_conll_dependency(tn_input);
            auto data = tree_instances(raw, mf.index);
            best = tune(data, mf.model, method, grids, g.seed);
            ap = average_precision(to_ranked_units(score_batch(data, mf.model, best)));
        }
        Table t;
        t.columns = {"parameter", "value"};
        t.add_row({"method", tn_opts.method});
        t.add_row({"K", std::to_string(best.K)});
        t.add_row({"s", format_double(best.s)});
        t.add_row({"c", format_double(best.c)});
        t.add_row({"a", format_double(best.a)});
        t.add_row({"dev_average_precision", format_double(ap)});
        emit(t, g);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
