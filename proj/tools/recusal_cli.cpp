// Command-line front end: data generation, training, attack evaluation,
// manipulation sweeps, report rendering and a line-delimited serve mode.
#include "recusal/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace recusal;

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<std::uint8_t>& data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < data.size(); i += 3) {
        const std::uint32_t b0 = data[i];
        const std::uint32_t b1 = i + 1 < data.size() ? data[i + 1] : 0;
        const std::uint32_t b2 = i + 2 < data.size() ? data[i + 2] : 0;
        const std::uint32_t triple = (b0 << 16) | (b1 << 8) | b2;
        out.push_back(kB64Alphabet[(triple >> 18) & 63]);
        out.push_back(kB64Alphabet[(triple >> 12) & 63]);
        out.push_back(i + 1 < data.size() ? kB64Alphabet[(triple >> 6) & 63] : '=');
        out.push_back(i + 2 < data.size() ? kB64Alphabet[triple & 63] : '=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw ParseError("base64 payload length must be a multiple of 4");
    int rev[256];
    std::fill(std::begin(rev), std::end(rev), -1);
    for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64Alphabet[i])] = i;

    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=') {
                if (i + 4 != text.size() || k < 2) throw ParseError("misplaced base64 padding");
                vals[k] = 0;
                ++pad;
            } else {
                if (pad > 0) throw ParseError("misplaced base64 padding");
                vals[k] = rev[static_cast<unsigned char>(c)];
                if (vals[k] < 0) throw ParseError("invalid base64 character");
            }
        }
        const std::uint32_t triple = (static_cast<std::uint32_t>(vals[0]) << 18) |
                                     (static_cast<std::uint32_t>(vals[1]) << 12) |
                                     (static_cast<std::uint32_t>(vals[2]) << 6) |
                                     static_cast<std::uint32_t>(vals[3]);
        out.push_back(static_cast<std::uint8_t>((triple >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((triple >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(triple & 0xff));
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out.flush()) throw IoError("failed writing " + path);
}

void emit_run_outputs(const Report& report, const std::vector<AttackResult>& raw,
                      const std::string& dir, const std::string& prefix) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
    emit_report(report, dir + "/" + prefix + "report.json", ReportFormat::json);
    emit_report(report, dir + "/" + prefix + "report.csv", ReportFormat::csv);
    save_attack_results(raw, dir + "/" + prefix + "scores.csv");
}

int cmd_gen_data(const std::string& out, const std::string& format, const SyntheticSpec& spec,
                 std::uint64_t seed) {
    const Dataset d = generate_synthetic(spec.classes, spec.per_class, spec.shape,
                                         spec.separation, seed);
    save_dataset(d, out,
                 format == "cifar_binary" ? FileFormat::cifar_binary : FileFormat::csv);
    std::cout << "wrote " << d.size() << " samples (" << spec.classes << " classes, "
              << spec.shape.height << "x" << spec.shape.width << "x" << spec.shape.channels
              << ") to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, std::string out_dir) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    if (out_dir.empty()) out_dir = cfg.output_dir;
    const BuildContext ctx = build_context(cfg);
    save_context(ctx, out_dir);
    for (const Arm& arm : ctx.arms) {
        std::cout << arm.label << ": train_acc=" << render_percent(arm.train_acc)
                  << " test_acc=" << render_percent(arm.test_acc);
        if (arm.eo_acc) std::cout << " eo_acc=" << render_percent(*arm.eo_acc);
        std::cout << "\n";
    }
    std::cout << "saved model artifacts to " << out_dir << "\n";
    return 0;
}

int cmd_attack(const std::string& config_path, std::string out_dir) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    if (out_dir.empty()) out_dir = cfg.output_dir;
    const BuildContext ctx = build_context(cfg);
    std::vector<AttackResult> raw;
    const Report report = run_attacks(ctx, &raw);
    emit_run_outputs(report, raw, out_dir, "");
    std::cout << report_csv(report);
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& kind_name,
              const std::vector<double>& grid, std::string out_dir) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    if (out_dir.empty()) out_dir = cfg.output_dir;
    const SweepKind kind = sweep_kind_from_string(kind_name);
    const BuildContext ctx = build_context(cfg);
    std::vector<AttackResult> raw;
    const Report report = sweep_manipulation(ctx, kind, grid, &raw);
    emit_run_outputs(report, raw, out_dir, "sweep_");
    std::cout << report_csv(report);
    return 0;
}

int cmd_report(const std::string& in, const std::string& out_json, const std::string& out_csv) {
    const bool is_csv = in.size() >= 4 && in.substr(in.size() - 4) == ".csv";
    const Report report = is_csv ? load_report_csv(in) : load_report_json(in);
    if (!out_json.empty()) write_text(out_json, report_json(report) + "\n");
    if (!out_csv.empty()) write_text(out_csv, report_csv(report));
    if (out_json.empty() && out_csv.empty()) std::cout << report_csv(report);
    return 0;
}

// One JSON object per stdin line: {"pixels": <base64>, "label": int?, "id": u64?}.
// Replies with one JSON object per line; malformed requests get an "error"
// reply and the loop continues.
int cmd_serve(const std::string& dir, std::string arm_label) {
    const ServedModel served = load_served_model(dir);
    std::string labels;
    for (const Arm& a : served.arms) labels += (labels.empty() ? "" : ", ") + a.label;

    const Arm* arm = nullptr;
    if (arm_label.empty()) {
        if (served.arms.size() != 1)
            throw ValidationError("multiple arms available (" + labels + "); pick one with --arm");
        arm = &served.arms.front();
    } else {
        for (const Arm& a : served.arms)
            if (a.label == arm_label) arm = &a;
        if (!arm) throw ValidationError("unknown arm '" + arm_label + "' (have: " + labels + ")");
    }

    const Shape shape = served.cfg.dataset.synthetic.shape;
    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        nlohmann::ordered_json reply;
        try {
            const nlohmann::json req = nlohmann::json::parse(line);
            Sample s;
            s.image.shape = shape;
            s.image.pixels = base64_decode(req.at("pixels").get<std::string>());
            if (static_cast<int>(s.image.pixels.size()) != shape.pixel_count())
                throw ValidationError("pixel payload has " +
                                      std::to_string(s.image.pixels.size()) + " bytes, expected " +
                                      std::to_string(shape.pixel_count()));
            s.label = req.value("label", 0);
            s.id = req.value("id", std::uint64_t{0});

            const PredictionResponse res = arm->target.predict(s);
            reply["label"] = res.label;
            if (res.probs) {
                reply["probs"] = nlohmann::ordered_json::array();
                for (int i = 0; i < static_cast<int>(res.probs->size()); ++i)
                    reply["probs"].push_back((*res.probs)(i));
            } else {
                reply["probs"] = nullptr;
            }
            if (res.excluded)
                reply["excluded"] = *res.excluded;
            else
                reply["excluded"] = nullptr;
            reply["source"] = to_string(res.source);
            reply["participating"] = res.participating;
        } catch (const std::exception& e) {
            reply.clear();
            reply["error"] = e.what();
        }
        std::cout << reply.dump() << "\n" << std::flush;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"membership-defense laboratory"};
    app.require_subcommand(1);

    std::string out_path, config_path, out_dir, format = "csv";
    std::string sweep_kind, report_in, report_json_out, report_csv_out, serve_dir, serve_arm;
    std::vector<double> grid;
    SyntheticSpec spec;
    std::uint64_t seed = 1;

    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset file");
    gen->add_option("--out", out_path, "output path")->required();
    gen->add_option("--format", format, "csv or cifar_binary")
        ->check(CLI::IsMember({"csv", "cifar_binary"}));
    gen->add_option("--classes", spec.classes, "number of classes");
    gen->add_option("--per-class", spec.per_class, "samples per class");
    gen->add_option("--height", spec.shape.height, "image height");
    gen->add_option("--width", spec.shape.width, "image width");
    gen->add_option("--channels", spec.shape.channels, "image channels");
    gen->add_option("--separation", spec.separation, "class separability knob");
    gen->add_option("--seed", seed, "generator seed");

    CLI::App* train = app.add_subcommand("train", "train models and save artifacts");
    train->add_option("--config", config_path, "experiment config (ini)")->required();
    train->add_option("--out-dir", out_dir, "artifact directory (default: config output_dir)");

    CLI::App* attack = app.add_subcommand("attack", "run the configured attack suite");
    attack->add_option("--config", config_path, "experiment config (ini)")->required();
    attack->add_option("--out-dir", out_dir, "output directory (default: config output_dir)");

    CLI::App* sweep = app.add_subcommand("sweep", "sweep a query manipulation magnitude");
    sweep->add_option("--config", config_path, "experiment config (ini)")->required();
    sweep->add_option("--kind", sweep_kind, "rotation or translation")
        ->required()
        ->check(CLI::IsMember({"rotation", "translation"}));
    sweep->add_option("--grid", grid, "magnitudes, comma separated")
        ->required()
        ->delimiter(',');
    sweep->add_option("--out-dir", out_dir, "output directory (default: config output_dir)");

    CLI::App* report = app.add_subcommand("report", "re-render a saved report");
    report->add_option("--in", report_in, "report.json or report.csv")->required();
    report->add_option("--out-json", report_json_out, "write json here");
    report->add_option("--out-csv", report_csv_out, "write csv here");

    CLI::App* serve = app.add_subcommand("serve", "answer queries over stdin/stdout");
    serve->add_option("--dir", serve_dir, "artifact directory from `train`")->required();
    serve->add_option("--arm", serve_arm, "arm label, e.g. Undefended or ESE");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(out_path, format, spec, seed);
        if (train->parsed()) return cmd_train(config_path, out_dir);
        if (attack->parsed()) return cmd_attack(config_path, out_dir);
        if (sweep->parsed()) return cmd_sweep(config_path, sweep_kind, grid, out_dir);
        if (report->parsed()) return cmd_report(report_in, report_json_out, report_csv_out);
        if (serve->parsed()) return cmd_serve(serve_dir, serve_arm);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
