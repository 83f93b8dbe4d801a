#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qwthn/backend.hpp"
#include "qwthn/config.hpp"
#include "qwthn/errors.hpp"
#include "qwthn/report.hpp"
#include "qwthn/statevector.hpp"
#include "qwthn/train.hpp"

namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

using namespace qwthn;

bool report_check(const std::string& name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << std::endl;
    return ok;
}

CliConfig load_or_default(const std::string& path) {
    if (path.empty()) {
        return parse_config_json(nlohmann::json::object());
    }
    return load_config(path);
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    const CliConfig config = load_or_default(config_path);
    std::filesystem::create_directories(out_dir);

    TrainResult result = train_with_artifacts(config.train);
    const RunHistory& history = result.history;

    const std::string csv_path = out_dir + "/history.csv";
    const std::string summary_path = out_dir + "/summary.json";
    const std::string svg_path = out_dir + "/loss.svg";
    write_text_file(csv_path, history_csv(history));
    write_text_file(summary_path, history_summary_json(history).dump(2) + "\n");
    write_text_file(svg_path, loss_curve_svg(history));

    RunManifest manifest;
    manifest.tool_version = kToolVersion;
    manifest.seed = config.train.seed;
    manifest.config = config_to_json(config);
    manifest.artifacts = {{"history_csv", csv_path},
                          {"summary_json", summary_path},
                          {"loss_svg", svg_path}};
    const bool char_lm = config.train.task == TaskKind::CharLm;
    for (std::size_t i = 0; i < result.adapters.size(); ++i) {
        const std::string name =
            char_lm ? (i == 0 ? "adapter_q" : "adapter_v") : "adapter";
        const std::string path = out_dir + "/" + name + ".json";
        std::ofstream out(path);
        result.adapters[i]->save(out);
        manifest.artifacts.emplace_back(name, path);
    }
    write_manifest(manifest, out_dir + "/manifest.json");

    std::cout << "steps " << history.train_loss.size() << ", initial loss "
              << history.initial_loss() << ", final loss " << history.final_loss()
              << " (ratio " << history.final_loss() / history.initial_loss() << ")\n"
              << "artifacts written to " << out_dir << std::endl;
    return kExitOk;
}

int cmd_eval(const std::string& input_path, const std::string& run_dir, bool percent) {
    const MetricReport report = evaluate_jsonl(input_path);
    std::cout << metric_report_json(report, percent).dump(2) << std::endl;
    if (!run_dir.empty()) {
        std::filesystem::create_directories(run_dir);
        write_text_file(run_dir + "/metrics.json",
                        metric_report_json(report, percent).dump(2) + "\n");
        write_text_file(run_dir + "/metrics.csv", metric_report_csv(report, percent));
    }
    return kExitOk;
}

int cmd_params(const std::string& config_path) {
    const CliConfig config = load_or_default(config_path);
    RngState rng(config.train.seed);
    QwthnAdapter adapter = QwthnAdapter::init(config.train.qwthn, rng);
    const ParamReport report = adapter.param_report();

    std::printf("%-8s %10s\n", "stage", "params");
    for (const ParamReport::Stage& stage : report.stages) {
        std::printf("%-8s %10zu\n", stage.name.c_str(), stage.count);
    }
    std::printf("%-8s %10zu\n", "total", report.total);
    std::printf("\nLoRA r=4 %10zu  (100.0%%)\n", report.lora_reference);
    std::printf("QWTHN    %10zu  (%.1f%%)\n", report.total, 100.0 * report.ratio);

    const MpoSpec spec_a = config.train.qwthn.mpo_a_spec();
    const MpoSpec spec_b = config.train.qwthn.mpo_b_spec();
    auto print_factors = [](const char* name, const MpoSpec& spec) {
        std::printf("%s: in (", name);
        for (std::size_t i = 0; i < spec.in_dims.size(); ++i) {
            std::printf("%s%zu", i ? ", " : "", spec.in_dims[i]);
        }
        std::printf(") out (");
        for (std::size_t i = 0; i < spec.out_dims.size(); ++i) {
            std::printf("%s%zu", i ? ", " : "", spec.out_dims[i]);
        }
        std::printf(")\n");
        for (std::size_t d : spec.in_dims) {
            if (d == 1) {
                std::printf("  note: %s uses a padding factor of 1 (prime width)\n", name);
                break;
            }
        }
    };
    print_factors("mpo_a", spec_a);
    print_factors("mpo_b", spec_b);
    std::cout << param_report_json(report).dump(2) << std::endl;
    return kExitOk;
}

int cmd_qcheck(const std::string& backend_name, std::size_t shots, std::uint64_t seed,
               const std::string& out_dir) {
    bool all_ok = true;

    // protocol accounting: B = 8 samples on Q = 4 qubits is exactly 32 circuits
    RngState rng(seed);
    std::vector<Circuit> batch;
    for (std::size_t b = 0; b < 8; ++b) {
        std::vector<double> input(4), theta(qwthn_theta_size(4, 2));
        for (double& v : input) {
            v = rng.uniform(-3.14159, 3.14159);
        }
        for (double& v : theta) {
            v = rng.uniform(-3.14159, 3.14159);
        }
        batch.push_back(build_qwthn_circuit(input, theta, 4, 2));
    }

    BackendConfig local_config;
    auto local = make_backend(local_config);
    const Tensor reference = run_expectation_batch(*local, batch, MeasureMode::PerObservable);
    all_ok &= report_check("T = B x Q circuit accounting (8 x 4 = 32)",
                           local->circuits_executed() == 32);

    BackendConfig mock_config;
    mock_config.kind =
        backend_name == "local_exact" ? BackendKind::LocalExact : BackendKind::MockCloud;
    mock_config.seed = seed;
    mock_config.group_limit = 10;
    mock_config.latency_ms = 1.0;
    auto mock = make_backend(mock_config);
    const Tensor exact = run_expectation_batch(*mock, batch, MeasureMode::PerObservable);
    double worst = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        worst = std::max(worst, std::abs(exact[i] - reference[i]));
    }
    all_ok &= report_check("exact-mode agreement with the local backend <= 1e-9",
                           worst <= 1e-9);

    bool out_of_order = false;
    for (const JobRecord& a : mock->ledger()) {
        for (const JobRecord& b : mock->ledger()) {
            if (a.group < b.group && a.wall_ms > b.wall_ms) {
                out_of_order = true;
            }
        }
    }
    if (mock_config.kind == BackendKind::MockCloud) {
        all_ok &= report_check("groups completed out of submission order", out_of_order);
    }

    if (shots > 0) {
        BackendConfig shot_config = mock_config;
        shot_config.kind = BackendKind::MockCloud;
        shot_config.shots = shots;
        auto shot_backend = make_backend(shot_config);
        const Tensor estimate =
            run_expectation_batch(*shot_backend, batch, MeasureMode::Combined);
        const double limit = 3.0 / std::sqrt(static_cast<double>(shots));
        std::size_t within = 0;
        for (std::size_t i = 0; i < estimate.size(); ++i) {
            if (std::abs(estimate[i] - reference[i]) <= limit) {
                ++within;
            }
        }
        all_ok &= report_check("shot estimates within 3/sqrt(shots) for >= 99% of entries",
                               within * 100 >= estimate.size() * 99);
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::string lines;
        for (const JobRecord& record : mock->ledger()) {
            nlohmann::json j;
            j["job_id"] = record.id;
            j["group"] = record.group;
            j["status"] = job_status_name(record.status);
            j["wall_ms"] = record.wall_ms;
            lines += j.dump() + "\n";
        }
        write_text_file(out_dir + "/jobs.jsonl", lines);
        std::cout << "job ledger written to " << out_dir << "/jobs.jsonl" << std::endl;
    }
    return all_ok ? kExitOk : kExitNumeric;
}

int cmd_gradcheck(double epsilon) {
    bool all_ok = true;
    RngState rng(123);

    LoraConfig lconfig;
    lconfig.input_dim = 8;
    lconfig.output_dim = 8;
    lconfig.rank = 2;
    LoraAdapter lora = LoraAdapter::init(lconfig, rng);
    for (std::size_t i = 0; i < lora.up().size(); ++i) {
        lora.up()[i] = rng.uniform(-1, 1);
    }
    const GradCheckReport dense = grad_check_adapter(lora, 1, epsilon);
    std::printf("dense  max rel error %.3e over %zu params\n", dense.max_rel_error,
                dense.checked);
    all_ok &= report_check("dense gradients <= 1e-8", dense.max_rel_error <= 1e-8);

    QwthnConfig qconfig;
    qconfig.input_dim = 16;
    qconfig.output_dim = 16;
    qconfig.hidden_a = 8;
    qconfig.hidden_b = 8;
    qconfig.qubits = 2;
    qconfig.blocks = 1;
    QwthnAdapter adapter = QwthnAdapter::init(qconfig, rng, false);
    const GradCheckReport full = grad_check_adapter(adapter, 2, epsilon);
    std::printf("qwthn  max rel error %.3e over %zu params\n", full.max_rel_error,
                full.checked);
    all_ok &= report_check("full adapter gradients <= 1e-4", full.max_rel_error <= 1e-4);

    return all_ok ? kExitOk : kExitNumeric;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"QWTHN parameter-efficient fine-tuning tool"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "run";
    CLI::App* train_cmd = app.add_subcommand("train", "train an adapter per the config");
    train_cmd->add_option("--config", config_path, "JSON config file");
    train_cmd->add_option("--out", out_dir, "output directory");

    std::string eval_input;
    std::string eval_run;
    bool percent = false;
    CLI::App* eval_cmd = app.add_subcommand("eval", "score a JSONL corpus");
    eval_cmd->add_option("--input", eval_input, "JSONL input file")->required();
    eval_cmd->add_option("--run", eval_run, "run directory to write metrics into");
    eval_cmd->add_flag("--percent", percent, "report scores scaled by 100");

    std::string params_config;
    CLI::App* params_cmd =
        app.add_subcommand("params", "print the QWTHN vs LoRA parameter comparison");
    params_cmd->add_option("--config", params_config, "JSON config file");

    std::string qcheck_backend = "mock_cloud";
    std::size_t qcheck_shots = 0;
    std::uint64_t qcheck_seed = 7;
    std::string qcheck_out;
    CLI::App* qcheck_cmd =
        app.add_subcommand("qcheck", "verify the execution-backend protocol");
    qcheck_cmd->add_option("--backend", qcheck_backend, "local_exact or mock_cloud")
        ->check(CLI::IsMember({"local_exact", "mock_cloud"}));
    qcheck_cmd->add_option("--shots", qcheck_shots, "shot count for the sampling check");
    qcheck_cmd->add_option("--seed", qcheck_seed, "scheduler seed");
    qcheck_cmd->add_option("--out", qcheck_out, "directory for the job ledger");

    double epsilon = 1e-5;
    CLI::App* grad_cmd =
        app.add_subcommand("gradcheck", "finite-difference gradient verification");
    grad_cmd->add_option("--epsilon", epsilon, "central-difference step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (train_cmd->parsed()) {
            return cmd_train(config_path, out_dir);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_input, eval_run, percent);
        }
        if (params_cmd->parsed()) {
            return cmd_params(params_config);
        }
        if (qcheck_cmd->parsed()) {
            return cmd_qcheck(qcheck_backend, qcheck_shots, qcheck_seed, qcheck_out);
        }
        if (grad_cmd->parsed()) {
            return cmd_gradcheck(epsilon);
        }
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << std::endl;
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitConfig;
    }
    return kExitConfig;
}
