// SPDX-License-Identifier: Apache-2.0
//
// sqoe: command-line front end for every pipeline stage.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "sqoe/dataset.hpp"
#include "sqoe/distortion.hpp"
#include "sqoe/http_server.hpp"
#include "sqoe/lifting.hpp"
#include "sqoe/metrics.hpp"
#include "sqoe/model.hpp"
#include "sqoe/stereo.hpp"
#include "sqoe/study_service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sqoe {
namespace {

struct Output {
    std::string report_path;

    void emit(const json& j) const {
        const auto text = j.dump(2);
        std::cout << text << '\n';
        if (!report_path.empty()) {
            std::ofstream out(report_path);
            require(out.good(), ErrorKind::io, "cannot write '" + report_path + "'");
            out << text << '\n';
        }
    }
};

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::io, "cannot write '" + path.string() + "'");
    out << text;
}

StereoImage load_input(const std::string& in, const std::string& in2) {
    if (!in2.empty()) {
        return load_stereo(in, in2);
    }
    return load_stereo_auto(in);
}

/// Stereo sources in a directory: X_L.png/X_R.png pairs, other PNGs as side-by-side.
std::vector<StereoImage> load_pair_directory(const fs::path& dir) {
    require(fs::is_directory(dir), ErrorKind::not_found, "'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<StereoImage> out;
    for (const auto& f : files) {
        const auto stem = f.stem().string();
        const bool right = stem.size() > 2 && stem.ends_with("_R");
        if (right) {
            continue;
        }
        out.push_back(load_stereo_auto(f));
    }
    return out;
}

const DistortionTable& table_from(const std::string& path, DistortionTable& storage) {
    if (path.empty()) {
        return DistortionTable::builtin();
    }
    storage = DistortionTable::load(path);
    return storage;
}

ModelConfig model_config_from(const std::string& path) {
    return path.empty() ? ModelConfig{} : read_json_file(path).get<ModelConfig>();
}

TrainConfig train_config_from(const std::string& path) {
    return path.empty() ? TrainConfig{} : read_json_file(path).get<TrainConfig>();
}

std::vector<TrainExample> labelled(const std::vector<Sample2AFC>& samples,
                                   const std::vector<std::string>& ids) {
    std::map<std::string, const Sample2AFC*> by_id;
    for (const auto& s : samples) {
        by_id.emplace(s.sample_id, &s);
    }
    std::vector<TrainExample> out;
    for (const auto& id : ids) {
        const auto& s = *by_id.at(id);
        if (s.judgments.empty()) {
            continue;
        }
        const auto label = consensus(s);
        if (label.majority == Majority::tie) {
            continue;
        }
        out.push_back({s, label});
    }
    return out;
}

std::vector<std::string> ids_of(const std::vector<Sample2AFC>& samples) {
    std::vector<std::string> ids;
    for (const auto& s : samples) {
        ids.push_back(s.sample_id);
    }
    return ids;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                fail(ErrorKind::parse, "not a number: '" + item + "'");
            }
        }
    }
    return out;
}

/// Two-column CSV (prediction, reference) with an optional header row.
std::pair<std::vector<double>, std::vector<double>> read_score_csv(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot open '" + path.string() + "'");
    std::vector<double> x;
    std::vector<double> y;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto comma = line.find(',');
        require(comma != std::string::npos, ErrorKind::parse,
                path.string() + ":" + std::to_string(line_no) + ": expected two columns");
        try {
            const double a = std::stod(line.substr(0, comma));
            const double b = std::stod(line.substr(comma + 1));
            x.push_back(a);
            y.push_back(b);
        } catch (const std::invalid_argument&) {
            require(line_no == 1, ErrorKind::parse,
                    path.string() + ":" + std::to_string(line_no) + ": not numeric");
        }
    }
    return {x, y};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---- subcommands -----------------------------------------------------------------------

struct DistortArgs {
    std::string in, in2, kind, side = "both", out = "distorted", table;
    double strength = 0.0;
    std::uint64_t seed = 0;
};

json run_distort(const DistortArgs& a) {
    const auto stereo = load_input(a.in, a.in2);
    DistortionTable storage;
    const auto& table = table_from(a.table, storage);
    auto spec = make_spec(parse_distortion_kind(a.kind), a.strength, parse_side_policy(a.side),
                          a.seed, table);
    const auto result = apply_distortion(stereo, spec);
    save_stereo(result, a.out);
    return {{"spec", spec},
            {"left", a.out + "_L.png"},
            {"right", a.out + "_R.png"},
            {"mean_abs_deviation", mean_abs_deviation(result, stereo)}};
}

struct LiftArgs {
    std::string image, depth, target = "right", inpainter = "builtin", inpaint_cmd, depth_cmd,
                work_dir, out = "lifted";
    double baseline = 1.0;
};

json run_lift(const LiftArgs& a) {
    LiftConfig cfg;
    cfg.baseline_scale = a.baseline;
    require(a.target == "left" || a.target == "right", ErrorKind::invalid_argument,
            "--target must be left or right");
    cfg.target_view = a.target == "left" ? TargetView::synthesize_left : TargetView::synthesize_right;
    require(a.inpainter == "builtin" || a.inpainter == "external", ErrorKind::invalid_argument,
            "--inpainter must be builtin or external");
    cfg.inpainter = a.inpainter == "builtin" ? InpainterKind::diffusion_fill_builtin
                                             : InpainterKind::external;
    cfg.inpaint_command = a.inpaint_cmd;
    cfg.depth_command = a.depth_cmd;
    cfg.work_dir = a.work_dir.empty() ? fs::temp_directory_path() / "sqoe_lift" : fs::path(a.work_dir);
    DepthMap depth;
    if (!a.depth.empty()) {
        cfg.depth_source = DepthSource::provided_map;
        depth = load_depth(a.depth);
    } else {
        cfg.depth_source = DepthSource::external_estimator;
        depth = estimate_depth_external(a.image, cfg);
    }
    cfg.validate();
    const auto mono = read_png(a.image);
    auto result = lift_to_stereo_detailed(mono, depth, cfg);
    save_stereo(result.stereo, a.out);
    std::size_t holes = 0;
    for (auto h : result.raw_warp.hole_mask) {
        holes += h != 0 ? 1 : 0;
    }
    return {{"left", a.out + "_L.png"},
            {"right", a.out + "_R.png"},
            {"hole_pixels", holes},
            {"target_view", a.target}};
}

struct BuildArgs {
    std::string pairs, out = "dataset", table, kinds;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double min_strength = 0.2, max_strength = 1.0, temperature = 0.0;
    int oracle_votes = 0;
};

json run_build_dataset(const BuildArgs& a) {
    const auto sources = load_pair_directory(a.pairs);
    DistortionTable storage;
    const auto& table = table_from(a.table, storage);
    GenerateOptions opt;
    opt.count = a.n;
    opt.seed = a.seed;
    opt.min_strength = a.min_strength;
    opt.max_strength = a.max_strength;
    if (!a.kinds.empty()) {
        opt.pool.clear();
        std::stringstream ss(a.kinds);
        std::string k;
        while (std::getline(ss, k, ',')) {
            opt.pool.push_back(parse_distortion_kind(k));
        }
    }
    fs::create_directories(a.out);
    auto samples = generate_samples(sources, opt, table, a.out);
    if (a.oracle_votes > 0) {
        std::map<std::string, const StereoImage*> by_source;
        for (const auto& s : sources) {
            by_source.emplace(s.source_id(), &s);
        }
        for (auto& s : samples) {
            Fnv1a h;
            h.update(s.sample_id);
            s.judgments = oracle_judgments(*by_source.at(s.base_source_id), s, a.out,
                                           a.oracle_votes, a.temperature, mix_seed(a.seed, h.digest()));
        }
    }
    const auto manifest = save_scope(samples, a.out);
    json j = {{"manifest", manifest.string()}, {"samples", samples.size()}};
    if (a.oracle_votes > 0) {
        j["consensus"] = consensus_histogram(samples).to_json();
    }
    return j;
}

struct TrainArgs {
    std::string manifest, model_config, train_config, out = "model.ckpt", log, backbone;
    std::uint64_t split_seed = 0;
    int epochs = 0;
    double lr = 0.0;
    std::uint64_t init_seed = 0;
};

json run_train(const TrainArgs& a) {
    const auto samples = load_scope(a.manifest);
    auto mcfg = model_config_from(a.model_config);
    auto tcfg = train_config_from(a.train_config);
    if (a.epochs > 0) {
        tcfg.epochs = a.epochs;
    }
    if (a.lr > 0.0) {
        tcfg.learning_rate = a.lr;
    }
    const auto split = partition(ids_of(samples), a.split_seed);
    const auto root = fs::path(a.manifest).parent_path();
    const auto train_set = labelled(samples, split.train_ids);
    require(!train_set.empty(), ErrorKind::invalid_argument,
            "no judged, non-tied samples in the training split");
    Model model(mcfg, a.init_seed);
    std::size_t imported = 0;
    if (!a.backbone.empty()) {
        imported = import_backbone(model, a.backbone);
    }
    const auto train_prepared = prepare_examples(train_set, mcfg, root);
    const auto val_prepared = prepare_examples(labelled(samples, split.val_ids), mcfg, root);
    std::ofstream log_file;
    if (!a.log.empty()) {
        log_file.open(a.log, std::ios::trunc);
        require(log_file.good(), ErrorKind::io, "cannot write '" + a.log + "'");
    }
    const auto result = train(model, train_prepared, val_prepared, tcfg,
                              a.log.empty() ? nullptr : &log_file);
    save_checkpoint(model, a.out);
    json log = json::array();
    for (const auto& e : result.log) {
        log.push_back(e.to_json());
    }
    return {{"checkpoint", a.out},
            {"train_samples", train_prepared.size()},
            {"val_samples", val_prepared.size()},
            {"imported_backbone_tensors", imported},
            {"model_config", mcfg},
            {"train_config", tcfg},
            {"log", log}};
}

json run_score(const std::string& ckpt, const std::string& in, const std::string& in2) {
    const auto model = load_checkpoint(ckpt);
    const auto stereo = load_input(in, in2);
    return {{"score", model.score(stereo).value}, {"source_id", stereo.source_id()}};
}

struct EvaluateArgs {
    std::string manifest, ckpt, scores, csv, split = "all";
    std::uint64_t split_seed = 0;
    int repeats = 0;
};

json run_evaluate(const EvaluateArgs& a) {
    if (!a.scores.empty()) {
        const auto [x, y] = read_score_csv(a.scores);
        return {{"n", x.size()}, {"srocc", optional_json(srocc(x, y))}, {"plcc", optional_json(plcc(x, y))}};
    }
    require(!a.manifest.empty() && !a.ckpt.empty(), ErrorKind::invalid_argument,
            "evaluate needs --manifest and --ckpt (or --scores)");
    const auto samples = load_scope(a.manifest);
    const auto model = load_checkpoint(a.ckpt);
    const auto root = fs::path(a.manifest).parent_path();
    std::vector<Sample2AFC> judged;
    for (const auto& s : samples) {
        if (!s.judgments.empty()) {
            judged.push_back(s);
        }
    }
    require(!judged.empty(), ErrorKind::invalid_argument, "manifest has no judged samples");
    std::map<std::string, Choice> predictions;
    for (const auto& s : judged) {
        predictions[s.sample_id] = predict_preference(s, model, root);
    }
    auto subset = [&](const std::vector<std::string>& ids) {
        std::set<std::string> keep(ids.begin(), ids.end());
        std::vector<Sample2AFC> sel;
        std::map<std::string, Choice> preds;
        for (const auto& s : judged) {
            if (keep.count(s.sample_id) != 0) {
                sel.push_back(s);
                preds[s.sample_id] = predictions.at(s.sample_id);
            }
        }
        return accuracy_by_split(sel, preds);
    };
    json j;
    if (a.repeats > 0) {
        j = repeated_split_evaluation(ids_of(judged), a.split_seed, a.repeats,
                                      [&](const DatasetSplit& sp) { return subset(sp.test_ids); })
                .to_json();
    } else {
        SplitAccuracyReport report;
        if (a.split == "all") {
            report = accuracy_by_split(judged, predictions);
        } else {
            const auto sp = partition(ids_of(judged), a.split_seed);
            require(a.split == "train" || a.split == "val" || a.split == "test",
                    ErrorKind::invalid_argument, "--split must be all, train, val or test");
            report = subset(a.split == "train" ? sp.train_ids : a.split == "val" ? sp.val_ids : sp.test_ids);
        }
        j = report.to_json();
        if (!a.csv.empty()) {
            write_text(a.csv, report.to_csv());
        }
    }
    j["split"] = a.repeats > 0 ? "repeated_test" : a.split;
    return j;
}

struct SweepArgs {
    std::string images, kind = "gaussian_white_noise", strengths, scorer = "oracle", ckpt, csv, table;
    int steps = 10;
    std::uint64_t seed = 0;
};

json run_sweep(const SweepArgs& a) {
    const auto images = load_pair_directory(a.images);
    require(!images.empty(), ErrorKind::invalid_argument, "no stereo images in '" + a.images + "'");
    std::vector<double> strengths = parse_number_list(a.strengths);
    if (strengths.empty()) {
        require(a.steps >= 1, ErrorKind::invalid_argument, "--steps must be >= 1");
        for (int i = 0; i < a.steps; ++i) {
            strengths.push_back(a.steps == 1 ? 0.0 : static_cast<double>(i) / (a.steps - 1));
        }
    }
    StereoScorer scorer;
    std::optional<Model> model;
    if (a.scorer == "oracle") {
        scorer = noise_energy_score;
    } else if (a.scorer == "model") {
        require(!a.ckpt.empty(), ErrorKind::invalid_argument, "--scorer model needs --ckpt");
        model.emplace(load_checkpoint(a.ckpt));
        scorer = [&model](const StereoImage& c, const StereoImage&) { return model->score(c).value; };
    } else {
        fail(ErrorKind::invalid_argument, "--scorer must be oracle or model");
    }
    DistortionTable storage;
    const auto curve = degradation_sweep(images, parse_distortion_kind(a.kind), strengths, scorer,
                                         a.seed, table_from(a.table, storage));
    if (!a.csv.empty()) {
        write_text(a.csv, curve.to_csv());
    }
    return curve.to_json();
}

json run_kappa(const std::string& manifest) {
    const auto study = responses_by_participant(load_scope(manifest, {false}));
    json j = {{"participants", study.size()}};
    std::set<std::string> media;
    for (const auto& [p, by_medium] : study) {
        for (const auto& [m, r] : by_medium) {
            media.insert(m);
        }
    }
    j["medium_agreement"] = media.size() >= 2 ? medium_agreement(study).to_json() : json(nullptr);
    json raters = json::object();
    for (const auto& m : media) {
        std::size_t covering = 0;
        for (const auto& [p, by_medium] : study) {
            covering += by_medium.count(m);
        }
        if (covering >= 2) {
            raters[m] = rater_agreement(study, m).to_json();
        }
    }
    j["rater_agreement"] = raters;
    return j;
}

/// Input: JSON array of {"votes": [..], "model_choice": k}.
json run_align(const std::string& path) {
    const auto data = read_json_file(path);
    require(data.is_array(), ErrorKind::parse, "align input must be a JSON array");
    std::vector<std::vector<int>> votes;
    std::vector<int> choices;
    for (const auto& item : data) {
        votes.push_back(item.at("votes").get<std::vector<int>>());
        choices.push_back(item.at("model_choice").get<int>());
    }
    const auto s = alignment(votes, choices);
    return {{"samples", votes.size()}, {"majority", s.majority}, {"proportional", s.proportional}};
}

int run(int argc, char** argv) {
    CLI::App app{"Stereoscopic quality-of-experience toolkit"};
    app.require_subcommand(1);
    Output output;
    app.add_option("--report", output.report_path, "Also write the JSON result to this file");

    DistortArgs distort;
    auto* c_distort = app.add_subcommand("distort", "Apply one distortion to a stereo pair");
    c_distort->add_option("--in", distort.in, "Left view, _L/_R file, or side-by-side image")->required();
    c_distort->add_option("--in2", distort.in2, "Right view");
    c_distort->add_option("--kind", distort.kind, "Distortion kind")->required();
    c_distort->add_option("--strength", distort.strength, "Strength in [0,1]")->required();
    c_distort->add_option("--side", distort.side, "left_only, right_only or both");
    c_distort->add_option("--seed", distort.seed);
    c_distort->add_option("--out", distort.out, "Output prefix (writes PREFIX_L.png, PREFIX_R.png)");
    c_distort->add_option("--table", distort.table, "Strength-to-parameter table (JSON)");

    LiftArgs lift;
    auto* c_lift = app.add_subcommand("lift", "Synthesize a stereo pair from one image and depth");
    c_lift->add_option("--image", lift.image)->required();
    c_lift->add_option("--depth", lift.depth, ".npy or 16-bit PNG depth map");
    c_lift->add_option("--baseline", lift.baseline, "disparity = baseline / depth");
    c_lift->add_option("--target", lift.target, "View to synthesize: left or right");
    c_lift->add_option("--inpainter", lift.inpainter, "builtin or external");
    c_lift->add_option("--inpaint-cmd", lift.inpaint_cmd, "External inpainter; {dir} is substituted");
    c_lift->add_option("--depth-cmd", lift.depth_cmd, "External depth estimator; {input}/{output}");
    c_lift->add_option("--work-dir", lift.work_dir);
    c_lift->add_option("--out", lift.out, "Output prefix");

    BuildArgs build;
    auto* c_build = app.add_subcommand("build-dataset", "Generate 2AFC samples and a manifest");
    c_build->add_option("--pairs", build.pairs, "Directory of stereo sources")->required();
    c_build->add_option("--n", build.n, "Number of samples (default: one per source)");
    c_build->add_option("--seed", build.seed);
    c_build->add_option("--out", build.out, "Dataset directory");
    c_build->add_option("--min-strength", build.min_strength);
    c_build->add_option("--max-strength", build.max_strength);
    c_build->add_option("--kinds", build.kinds, "Comma-separated distortion pool");
    c_build->add_option("--table", build.table);
    c_build->add_option("--oracle-votes", build.oracle_votes, "Simulated judgments per sample");
    c_build->add_option("--oracle-temperature", build.temperature, "Oracle vote noise (0 = deterministic)");

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train a model on a judged manifest");
    c_train->add_option("--manifest", tr.manifest)->required();
    c_train->add_option("--model-config", tr.model_config, "Model config JSON");
    c_train->add_option("--train-config", tr.train_config, "Training config JSON");
    c_train->add_option("--out", tr.out, "Checkpoint path");
    c_train->add_option("--log", tr.log, "Training log (JSONL)");
    c_train->add_option("--split-seed", tr.split_seed);
    c_train->add_option("--epochs", tr.epochs, "Override the configured epoch count");
    c_train->add_option("--lr", tr.lr, "Override the configured learning rate");
    c_train->add_option("--seed", tr.init_seed, "Weight initialization seed");
    c_train->add_option("--backbone", tr.backbone, "Checkpoint to import backbone tensors from");

    std::string score_ckpt, score_in, score_in2;
    auto* c_score = app.add_subcommand("score", "Score one stereo pair (lower is better)");
    c_score->add_option("--ckpt", score_ckpt)->required();
    c_score->add_option("--in", score_in)->required();
    c_score->add_option("--in2", score_in2);

    EvaluateArgs ev;
    auto* c_eval = app.add_subcommand("evaluate", "Consensus-split accuracy or score correlation");
    c_eval->add_option("--manifest", ev.manifest);
    c_eval->add_option("--ckpt", ev.ckpt);
    c_eval->add_option("--split", ev.split, "all, train, val or test");
    c_eval->add_option("--split-seed", ev.split_seed);
    c_eval->add_option("--repeats", ev.repeats, "Repeated test splits (mean/std)");
    c_eval->add_option("--csv", ev.csv, "Also write the report as CSV");
    c_eval->add_option("--scores", ev.scores, "CSV of prediction,reference for SROCC/PLCC");

    SweepArgs sw;
    auto* c_sweep = app.add_subcommand("sweep", "Progressive degradation sweep");
    c_sweep->add_option("--images", sw.images, "Directory of stereo sources")->required();
    c_sweep->add_option("--kind", sw.kind);
    c_sweep->add_option("--strengths", sw.strengths, "Comma-separated ascending strengths");
    c_sweep->add_option("--steps", sw.steps, "Evenly spaced strengths in [0,1]");
    c_sweep->add_option("--scorer", sw.scorer, "oracle or model");
    c_sweep->add_option("--ckpt", sw.ckpt);
    c_sweep->add_option("--csv", sw.csv, "Plot-ready CSV output");
    c_sweep->add_option("--seed", sw.seed);
    c_sweep->add_option("--table", sw.table);

    std::string kappa_manifest;
    auto* c_kappa = app.add_subcommand("kappa", "Cohen's kappa agreement across mediums and raters");
    c_kappa->add_option("--manifest", kappa_manifest)->required();

    std::string align_input;
    auto* c_align = app.add_subcommand("align", "Majority/proportional human alignment");
    c_align->add_option("--votes", align_input, "JSON array of {votes, model_choice}")->required();

    std::string serve_manifest, serve_dir, serve_host = "127.0.0.1";
    int serve_port = 8080;
    std::uint64_t serve_seed = 0;
    auto* c_serve = app.add_subcommand("serve", "Run the annotation HTTP service");
    c_serve->add_option("--manifest", serve_manifest)->required();
    c_serve->add_option("--data-dir", serve_dir)->envname("SQOE_DATA_DIR");
    c_serve->add_option("--port", serve_port);
    c_serve->add_option("--host", serve_host);
    c_serve->add_option("--seed", serve_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << '\n';
        return 2;
    }

    if (*c_distort) {
        output.emit(run_distort(distort));
    } else if (*c_lift) {
        output.emit(run_lift(lift));
    } else if (*c_build) {
        output.emit(run_build_dataset(build));
    } else if (*c_train) {
        output.emit(run_train(tr));
    } else if (*c_score) {
        output.emit(run_score(score_ckpt, score_in, score_in2));
    } else if (*c_eval) {
        output.emit(run_evaluate(ev));
    } else if (*c_sweep) {
        output.emit(run_sweep(sw));
    } else if (*c_kappa) {
        output.emit(run_kappa(kappa_manifest));
    } else if (*c_align) {
        output.emit(run_align(align_input));
    } else if (*c_serve) {
        if (serve_dir.empty()) {
            serve_dir = "study_data";
        }
        StudyService service(serve_manifest, serve_dir, serve_seed);
        std::cerr << json{{"listening", serve_host + ":" + std::to_string(serve_port)},
                          {"samples", service.sample_count()},
                          {"data_dir", serve_dir}}
                         .dump()
                  << '\n';
        serve(service, serve_host, serve_port);
    }
    return 0;
}

}  // namespace
}  // namespace sqoe

int main(int argc, char** argv) {
    try {
        return sqoe::run(argc, argv);
    } catch (const sqoe::Error& e) {
        std::cerr << json{{"error", {{"kind", sqoe::to_string(e.kind())}, {"message", e.what()}}}}.dump()
                  << '\n';
    } catch (const json::exception& e) {
        std::cerr << json{{"error", {{"kind", "parse"}, {"message", e.what()}}}}.dump() << '\n';
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << '\n';
    }
    return 1;
}
