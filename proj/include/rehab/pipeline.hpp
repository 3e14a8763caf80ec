#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rehab/models.hpp"
#include "rehab/stats.hpp"
#include "rehab/synth.hpp"

namespace rehab::pipeline {

using cohort::Domain;
using cohort::Stage;

struct PipelineConfig {
    std::string notes_path;
    std::string demographics_path;
    std::string lexicon_path;   // empty = built-in lexicon
    std::string patterns_path;  // empty = built-in patterns
    std::string out_dir = "out";
    cohort::BinningConfig binning;
    double mcid_factor = 0.2;
    double p_threshold = 0.3;
    bool yates = true;
    std::vector<models::ModelKind> model_list;  // empty = all five
    models::Hyperparameters params;
    std::size_t folds = 3;
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const;
};

PipelineConfig parse_config(const std::string& content, const std::string& origin);
PipelineConfig load_config(const std::string& path);

// Shared inputs resolved from a config (files or built-in defaults).
struct Inputs {
    std::vector<notes::ProcedureNote> note_list;
    std::map<std::string, cohort::Demographics> demographics;
    notes::ExerciseLexicon lexicon;
    notes::PatternSet patterns;
};

Inputs load_inputs(const PipelineConfig& config);

// Each command writes its artifacts under config.out_dir and returns the
// list of files written (relative to out_dir).
std::vector<std::string> run_parse(const PipelineConfig& config);
std::vector<std::string> run_analyze(const PipelineConfig& config);
std::vector<std::string> run_train_eval(const PipelineConfig& config);
std::vector<std::string> run_simulate(const synth::SynthConfig& config,
                                      const std::string& out_dir);
std::vector<std::string> run_replay(const stats::ContingencyTable2x2& counts,
                                    const std::string& feature, Stage stage, Domain domain,
                                    const std::string& out_dir);
std::vector<std::string> run_report(const std::string& out_dir);

// Figure rendering (exposed for tests).
std::string render_box_plot_svg(const std::string& title,
                                const std::vector<std::string>& group_names,
                                const std::vector<std::vector<double>>& groups);
std::string render_roc_svg(const std::string& title, const std::vector<double>& fpr_grid,
                           const std::vector<double>& mean_tpr,
                           const std::vector<double>& sd_tpr, double mean_auc);

}  // namespace rehab::pipeline
