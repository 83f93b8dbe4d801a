#include "qwthn/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qwthn/errors.hpp"

namespace qwthn {

namespace {

using nlohmann::json;

std::string fmt(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::string fmt6(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

} // namespace

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out << content;
    if (!out) {
        throw IoError("write failed for '" + path + "'");
    }
}

std::string history_csv(const RunHistory& history) {
    std::string csv = "step,train_loss,val_loss,ms_per_step\n";
    for (std::size_t step = 0; step < history.train_loss.size(); ++step) {
        csv += std::to_string(step) + "," + fmt(history.train_loss[step]) + ",";
        const auto it =
            std::find(history.val_steps.begin(), history.val_steps.end(), step);
        if (it != history.val_steps.end()) {
            csv += fmt(history.val_loss[static_cast<std::size_t>(
                it - history.val_steps.begin())]);
        }
        csv += "," + fmt(history.ms_per_step[step]) + "\n";
    }
    return csv;
}

nlohmann::json history_summary_json(const RunHistory& history) {
    json j;
    j["steps"] = history.train_loss.size();
    j["initial_loss"] = history.initial_loss();
    j["final_loss"] = history.final_loss();
    j["loss_ratio"] = history.final_loss() / history.initial_loss();
    j["val_steps"] = history.val_steps;
    j["val_loss"] = history.val_loss;
    j["params"] = param_report_json(history.params);
    j["optimizer_scalars_touched"] = history.optimizer_scalars_touched;
    return j;
}

std::string loss_curve_svg(const RunHistory& history) {
    const double width = 640.0, height = 400.0, margin = 48.0;
    const std::size_t steps = history.train_loss.size();
    double lo = history.train_loss.front(), hi = lo;
    for (double v : history.train_loss) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : history.val_loss) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi <= lo) {
        hi = lo + 1.0;
    }
    auto sx = [&](double step) {
        return margin + (width - 2 * margin) * step /
                            std::max<double>(1.0, static_cast<double>(steps - 1));
    };
    auto sy = [&](double value) {
        return height - margin - (height - 2 * margin) * (value - lo) / (hi - lo);
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\">\n";
    svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
        << width - margin << "\" y2=\"" << height - margin
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
        << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">step</text>\n";
    svg << "<text x=\"14\" y=\"" << height / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
        << height / 2 << ")\">loss</text>\n";

    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t step = 0; step < steps; ++step) {
        svg << sx(static_cast<double>(step)) << ',' << sy(history.train_loss[step]) << ' ';
    }
    svg << "\"/>\n";

    svg << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < history.val_steps.size(); ++i) {
        svg << sx(static_cast<double>(history.val_steps[i])) << ','
            << sy(history.val_loss[i]) << ' ';
    }
    svg << "\"/>\n";

    svg << "<text x=\"" << width - margin << "\" y=\"" << margin
        << "\" text-anchor=\"end\" font-size=\"12\" fill=\"#1f77b4\">train</text>\n";
    svg << "<text x=\"" << width - margin << "\" y=\"" << margin + 16
        << "\" text-anchor=\"end\" font-size=\"12\" fill=\"#d62728\">val</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

MetricReport evaluate_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("eval: cannot open '" + path + "'");
    }
    MetricReport report;
    std::size_t text_samples = 0;
    std::vector<AnswerSample> answers;
    std::vector<std::string> gold;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ConfigError("eval: line " + std::to_string(line_no) + ": " + e.what());
        }
        const std::string candidate = j.value("candidate", "");
        if (j.contains("references")) {
            const std::vector<std::string> refs =
                j.at("references").get<std::vector<std::string>>();
            if (refs.empty()) {
                throw ConfigError("eval: line " + std::to_string(line_no) +
                                  ": empty reference list");
            }
            const TokenSeq cand = tokenize(candidate);
            if (cand.empty()) {
                throw ConfigError("eval: line " + std::to_string(line_no) +
                                  ": empty candidate");
            }
            std::vector<TokenSeq> ref_seqs;
            for (const std::string& r : refs) {
                ref_seqs.push_back(tokenize(r));
            }
            report.bleu4 += bleu4(cand, ref_seqs);
            // ROUGE scores use the first reference
            report.rouge1 += rouge_n(cand, ref_seqs.front(), 1);
            if (ref_seqs.front().size() >= 2) {
                report.rouge2 += rouge_n(cand, ref_seqs.front(), 2);
            }
            report.rougeL += rouge_l(cand, ref_seqs.front());
            ++text_samples;
        }
        if (j.contains("gold")) {
            AnswerSample sample;
            sample.answer_segment = j.value("answer_segment", "");
            sample.full_text = j.value("full_text", candidate);
            answers.push_back(sample);
            gold.push_back(j.at("gold").get<std::string>());
        }
    }
    if (text_samples > 0) {
        report.bleu4 /= static_cast<double>(text_samples);
        report.rouge1 /= static_cast<double>(text_samples);
        report.rouge2 /= static_cast<double>(text_samples);
        report.rougeL /= static_cast<double>(text_samples);
    }
    if (!answers.empty()) {
        const AccuracyReport acc = answer_accuracy(answers, gold);
        report.sa = acc.sa;
        report.accuracy = acc.accuracy;
        report.has_accuracy = true;
    }
    if (text_samples == 0 && answers.empty()) {
        throw ConfigError("eval: no usable samples in '" + path + "'");
    }
    return report;
}

nlohmann::json metric_report_json(const MetricReport& report, bool percent) {
    const double scale = percent ? 100.0 : 1.0;
    json j;
    j["bleu4"] = report.bleu4 * scale;
    j["rouge1"] = report.rouge1 * scale;
    j["rouge2"] = report.rouge2 * scale;
    j["rougeL"] = report.rougeL * scale;
    if (report.has_accuracy) {
        j["sa"] = report.sa * scale;
        j["accuracy"] = report.accuracy * scale;
    }
    return j;
}

std::string metric_report_csv(const MetricReport& report, bool percent) {
    const double scale = percent ? 100.0 : 1.0;
    std::string csv = "bleu4,rouge1,rouge2,rougeL,sa,accuracy\n";
    csv += fmt6(report.bleu4 * scale) + "," + fmt6(report.rouge1 * scale) + "," +
           fmt6(report.rouge2 * scale) + "," + fmt6(report.rougeL * scale) + ",";
    if (report.has_accuracy) {
        csv += fmt6(report.sa * scale) + "," + fmt6(report.accuracy * scale);
    } else {
        csv += ",";
    }
    csv += "\n";
    return csv;
}

nlohmann::json param_report_json(const ParamReport& report) {
    json stages = json::array();
    for (const ParamReport::Stage& stage : report.stages) {
        stages.push_back({{"name", stage.name}, {"count", stage.count}});
    }
    json j;
    j["stages"] = stages;
    j["total"] = report.total;
    j["lora_rank4_reference"] = report.lora_reference;
    j["ratio_vs_lora_rank4"] = report.ratio;
    return j;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
    json artifacts;
    for (const auto& [name, artifact_path] : manifest.artifacts) {
        if (!std::filesystem::exists(artifact_path)) {
            throw IoError("manifest: artifact '" + artifact_path + "' does not exist");
        }
        artifacts[name] = artifact_path;
    }
    json j;
    j["tool_version"] = manifest.tool_version;
    j["seed"] = manifest.seed;
    j["config"] = manifest.config;
    j["artifacts"] = artifacts;
    write_text_file(path, j.dump(2) + "\n");
}

} // namespace qwthn
