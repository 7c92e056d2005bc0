// priornet: engagement-estimation pipeline CLI.
//
// Subcommands: preprocess, synth, train, eval, ablate, diagnose, gradcheck.
// Exit codes: 0 success, 2 validation/usage failure, 1 runtime error.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "priornet/ablation.hpp"
#include "priornet/checkpoint.hpp"
#include "priornet/clip_store.hpp"
#include "priornet/config_json.hpp"
#include "priornet/objective.hpp"
#include "priornet/synth.hpp"
#include "priornet/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Minimal binary PPM (P6, maxval 255) reader; frame directories hold one
// image per frame, ordered by filename.
priornet::Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open frame " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw std::invalid_argument("frame " + path + " is not a binary PPM (P6)");
    auto next_int = [&in, &path]() {
        // skip whitespace and '#' comments
        int c = in.get();
        while (c == '#' || std::isspace(c)) {
            if (c == '#')
                while (c != '\n' && c != EOF) c = in.get();
            c = in.get();
        }
        std::size_t value = 0;
        bool any = false;
        while (std::isdigit(c)) {
            value = value * 10 + static_cast<std::size_t>(c - '0');
            any = true;
            c = in.get();
        }
        if (!any) throw std::invalid_argument("malformed PPM header in " + path);
        return value;
    };
    const std::size_t w = next_int();
    const std::size_t h = next_int();
    const std::size_t maxval = next_int();
    if (maxval != 255) throw std::invalid_argument("PPM " + path + " must have maxval 255");
    std::vector<unsigned char> raw(w * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw std::runtime_error("truncated PPM " + path);
    priornet::Tensor img({h, w, 3});
    for (std::size_t i = 0; i < raw.size(); ++i) img[i] = static_cast<double>(raw[i]);
    return img;
}

int run_preprocess(const std::string& frames_dir, const std::string& sidecar_path,
                   const std::string& out_path, std::size_t clip_length, std::size_t resolution,
                   int label, const std::string& subject) {
    std::vector<std::string> frame_files;
    for (const auto& entry : fs::directory_iterator(frames_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension();
        if (ext == ".ppm") frame_files.push_back(entry.path().string());
    }
    std::sort(frame_files.begin(), frame_files.end());
    if (frame_files.empty())
        throw std::invalid_argument("no .ppm frames found in " + frames_dir);

    std::vector<priornet::Tensor> frames;
    frames.reserve(frame_files.size());
    for (const auto& f : frame_files) frames.push_back(read_ppm(f));

    const auto plan = priornet::plan_frame_indices(frames.size(), clip_length);
    const auto detections = priornet::read_detection_sidecar(sidecar_path);
    auto [clip, meta] = priornet::assemble_clip(frames, detections, plan, resolution);
    meta.label = label;
    meta.subject_id = subject;
    priornet::write_clip(out_path, clip, meta);
    std::cout << json{{"frames", frames.size()},
                      {"clip_length", clip_length},
                      {"missing_count", meta.missing_count},
                      {"missing_rate", meta.missing_rate},
                      {"out", out_path}}
                     .dump(2)
              << "\n";
    return 0;
}

int run_synth(const std::string& spec_path, const std::string& out_dir) {
    const priornet::SynthSpec spec = priornet::load_json_file(spec_path).get<priornet::SynthSpec>();
    const priornet::ClipDataset dataset = priornet::generate_dataset(spec);
    priornet::write_dataset(out_dir, dataset);
    std::cout << json{{"clips", dataset.size()}, {"out", out_dir}}.dump(2) << "\n";
    return 0;
}

int run_train(const std::string& config_path, const std::string& out_path) {
    const priornet::TrainConfig cfg =
        priornet::load_json_file(config_path).get<priornet::TrainConfig>();
    const priornet::ClipDataset dataset = priornet::load_or_generate_dataset(cfg);
    const priornet::TrainResult result = priornet::train_on_dataset(dataset, cfg);

    priornet::save_model(out_path, result.model);

    json history = json::array();
    for (const auto& entry : result.history) history.push_back(entry);
    priornet::save_json_file(out_path + ".history.json", history);

    priornet::ClipDataset transformed;
    if (!cfg.toggles.placeholders)
        transformed = priornet::detail::apply_placeholder_toggle(dataset, false);
    const priornet::ClipDataset& eval_view = cfg.toggles.placeholders ? dataset : transformed;
    const priornet::MetricsReport metrics =
        priornet::evaluate(result.model, eval_view, result.eval_indices, cfg.num_threads);
    priornet::save_json_file(out_path + ".metrics.json", metrics);

    std::cout << json{{"checkpoint", out_path},
                      {"epochs", result.history.size()},
                      {"final_loss", result.history.back().total},
                      {"eval_accuracy", metrics.accuracy},
                      {"eval_weighted_f1", metrics.weighted_f1},
                      {"frozen_checksum_preserved",
                       result.checksum_before == result.checksum_after}}
                     .dump(2)
              << "\n";
    return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& report_path) {
    const priornet::PriorNetModel model = priornet::load_model(ckpt_path);
    const priornet::ClipDataset dataset = priornet::read_dataset(data_dir);
    const priornet::MetricsReport metrics = priornet::evaluate(model, dataset);
    priornet::save_json_file(report_path, metrics);
    std::cout << json{{"accuracy", metrics.accuracy}, {"weighted_f1", metrics.weighted_f1}}.dump(2)
              << "\n";
    return 0;
}

int run_ablate(const std::string& config_path, std::size_t seeds, const std::string& out_path) {
    const priornet::TrainConfig base =
        priornet::load_json_file(config_path).get<priornet::TrainConfig>();
    json out;
    out["seeds"] = seeds;
    out["runs"] = json::array();
    std::vector<std::vector<double>> accuracy_by_arm;
    for (std::size_t s = 0; s < seeds; ++s) {
        priornet::TrainConfig cfg = base;
        cfg.seed = base.seed + s;
        if (cfg.synth.has_value()) cfg.synth->seed = cfg.synth->seed + s;
        const auto rows = priornet::run_ablation(cfg);
        if (accuracy_by_arm.empty()) accuracy_by_arm.resize(rows.size());
        json run;
        run["seed"] = cfg.seed;
        run["rows"] = rows;
        out["runs"].push_back(run);
        for (std::size_t r = 0; r < rows.size(); ++r) accuracy_by_arm[r].push_back(rows[r].accuracy);
    }
    json means = json::array();
    const auto grid = priornet::ablation_grid();
    for (std::size_t r = 0; r < accuracy_by_arm.size(); ++r) {
        double mean = 0.0;
        for (double a : accuracy_by_arm[r]) mean += a;
        mean /= static_cast<double>(accuracy_by_arm[r].size());
        means.push_back({{"name", grid[r].first}, {"mean_accuracy", mean}});
    }
    out["mean_by_variant"] = means;
    priornet::save_json_file(out_path, out);
    std::cout << means.dump(2) << "\n";
    return 0;
}

int run_diagnose(const std::string& ckpt_a, const std::string& ckpt_b, const std::string& data_dir,
                 const std::string& out_path) {
    const priornet::PriorNetModel with_placeholders = priornet::load_model(ckpt_a);
    const priornet::PriorNetModel without_placeholders = priornet::load_model(ckpt_b);
    const priornet::ClipDataset dataset = priornet::read_dataset(data_dir);
    const priornet::MissingnessGroupReport report =
        priornet::missingness_diagnostic(with_placeholders, without_placeholders, dataset);
    const json j = report;
    if (!out_path.empty()) priornet::save_json_file(out_path, j);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_gradcheck(std::size_t trials, std::uint64_t seed) {
    const priornet::GradientCheckReport report = priornet::run_loss_gradient_check(trials, seed);
    const json j = report;
    std::cout << j.dump(2) << "\n";
    return report.max_rel_error < 1e-5 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PriorNet engagement-estimation pipeline"};
    app.require_subcommand(1);

    // preprocess
    std::string frames_dir, sidecar_path, clip_out;
    std::size_t clip_length = 16, resolution = 224;
    int label = 0;
    std::string subject = "unknown";
    auto* preprocess = app.add_subcommand("preprocess", "Build a placeholder-encoded clip from frames");
    preprocess->add_option("--frames", frames_dir, "Directory of .ppm frames")->required();
    preprocess->add_option("--sidecar", sidecar_path, "Detection sidecar (JSON lines)")->required();
    preprocess->add_option("--out", clip_out, "Output clip file")->required();
    preprocess->add_option("--clip-length", clip_length, "Frames per clip (default 16)");
    preprocess->add_option("--resolution", resolution, "Target resolution (default 224)");
    preprocess->add_option("--label", label, "Class label stored in the clip");
    preprocess->add_option("--subject", subject, "Subject id stored in the clip");

    // synth
    std::string synth_spec_path, synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic clip dataset");
    synth->add_option("--spec", synth_spec_path, "synth.json spec file")->required();
    synth->add_option("--out", synth_out, "Output dataset directory")->required();

    // train
    std::string train_config_path, ckpt_out;
    auto* train_cmd = app.add_subcommand("train", "Train adapters and head");
    train_cmd->add_option("--config", train_config_path, "Training config JSON")->required();
    train_cmd->add_option("--out", ckpt_out, "Output checkpoint path")->required();

    // eval
    std::string eval_ckpt, eval_data, eval_report;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    eval_cmd->add_option("--ckpt", eval_ckpt, "Model checkpoint")->required();
    eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
    eval_cmd->add_option("--report", eval_report, "Metrics report output path")->required();

    // ablate
    std::string ablate_config, ablate_out;
    std::size_t ablate_seeds = 5;
    auto* ablate = app.add_subcommand("ablate", "Run the 8-arm component ablation");
    ablate->add_option("--config", ablate_config, "Base training config JSON")->required();
    ablate->add_option("--seeds", ablate_seeds, "Number of seeds (default 5)");
    ablate->add_option("--out", ablate_out, "Grid report output path")->required();

    // diagnose
    std::string diag_a, diag_b, diag_data, diag_out;
    auto* diagnose = app.add_subcommand("diagnose", "Missing-face-rate group comparison");
    diagnose->add_option("--ckpt-a", diag_a, "Checkpoint trained with placeholders")->required();
    diagnose->add_option("--ckpt-b", diag_b, "Checkpoint trained without placeholders")->required();
    diagnose->add_option("--data", diag_data, "Dataset directory")->required();
    diagnose->add_option("--out", diag_out, "Optional report output path");

    // gradcheck
    std::size_t trials = 100;
    std::uint64_t gradcheck_seed = 7;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference audit of the loss gradient");
    gradcheck->add_option("--trials", trials, "Number of random draws (default 100)");
    gradcheck->add_option("--seed", gradcheck_seed, "Draw seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*preprocess)
            return run_preprocess(frames_dir, sidecar_path, clip_out, clip_length, resolution,
                                  label, subject);
        if (*synth) return run_synth(synth_spec_path, synth_out);
        if (*train_cmd) return run_train(train_config_path, ckpt_out);
        if (*eval_cmd) return run_eval(eval_ckpt, eval_data, eval_report);
        if (*ablate) return run_ablate(ablate_config, ablate_seeds, ablate_out);
        if (*diagnose) return run_diagnose(diag_a, diag_b, diag_data, diag_out);
        if (*gradcheck) return run_gradcheck(trials, gradcheck_seed);
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
