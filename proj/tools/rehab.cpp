#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rehab/pipeline.hpp"

namespace {

using namespace rehab;

struct GlobalOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

void add_global_flags(CLI::App* cmd, GlobalOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Key-value config file");
    cmd->add_option("--out", opts.out_dir, "Output directory");
    cmd->add_option("--seed", opts.seed, "Master random seed")
        ->each([&](const std::string&) { opts.seed_set = true; });
    cmd->add_option("--threads", opts.threads, "Worker threads for the model grid");
}

std::string resolve_out(const std::string& from_flags, const std::string& from_config) {
    // precedence: REHAB_OUT > --out > config file > default
    if (const char* env = std::getenv("REHAB_OUT"); env && *env) return env;
    if (!from_flags.empty()) return from_flags;
    if (!from_config.empty()) return from_config;
    return "out";
}

pipeline::PipelineConfig make_pipeline_config(const GlobalOpts& opts,
                                              const std::string& notes_path,
                                              const std::string& demographics_path,
                                              const std::string& lexicon_path,
                                              const std::string& patterns_path) {
    pipeline::PipelineConfig cfg;
    if (!opts.config_path.empty()) cfg = pipeline::load_config(opts.config_path);
    if (!notes_path.empty()) cfg.notes_path = notes_path;
    if (!demographics_path.empty()) cfg.demographics_path = demographics_path;
    if (!lexicon_path.empty()) cfg.lexicon_path = lexicon_path;
    if (!patterns_path.empty()) cfg.patterns_path = patterns_path;
    cfg.out_dir = resolve_out(opts.out_dir, cfg.out_dir == "out" ? "" : cfg.out_dir);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (opts.threads > 0) cfg.threads = opts.threads;
    cfg.validate();
    return cfg;
}

void print_written(const std::string& out_dir, const std::vector<std::string>& written) {
    for (const auto& name : written) std::cout << out_dir << '/' << name << '\n';
}

cohort::Domain parse_domain(const std::string& name) {
    if (name == "BM") return cohort::Domain::BM;
    if (name == "AC") return cohort::Domain::AC;
    throw ConfigError("domain must be BM or AC, got '" + name + "'");
}

cohort::Stage parse_stage(const std::string& name) {
    if (name == "EARLY") return cohort::Stage::EARLY;
    if (name == "LATE") return cohort::Stage::LATE;
    throw ConfigError("stage must be EARLY or LATE, got '" + name + "'");
}

int run(int argc, char** argv) {
    CLI::App app{"Post-stroke rehabilitation note analysis pipeline"};
    app.require_subcommand(1);

    GlobalOpts opts;
    std::string notes_path, demographics_path, lexicon_path, patterns_path;

    auto* parse_cmd = app.add_subcommand("parse", "Extract scores and exercise mentions");
    add_global_flags(parse_cmd, opts);
    parse_cmd->add_option("--notes", notes_path, "Notes JSONL file");
    parse_cmd->add_option("--lexicon", lexicon_path, "Exercise lexicon TSV");
    parse_cmd->add_option("--patterns", patterns_path, "Score pattern file");

    auto* analyze_cmd =
        app.add_subcommand("analyze", "Assemble the cohort and run the association screen");
    add_global_flags(analyze_cmd, opts);
    analyze_cmd->add_option("--notes", notes_path, "Notes JSONL file");
    analyze_cmd->add_option("--demographics", demographics_path, "Demographics CSV");
    analyze_cmd->add_option("--lexicon", lexicon_path, "Exercise lexicon TSV");
    analyze_cmd->add_option("--patterns", patterns_path, "Score pattern file");

    auto* train_cmd =
        app.add_subcommand("train-eval", "Cross-validate classifiers over the model grid");
    add_global_flags(train_cmd, opts);
    train_cmd->add_option("--notes", notes_path, "Notes JSONL file");
    train_cmd->add_option("--demographics", demographics_path, "Demographics CSV");
    train_cmd->add_option("--lexicon", lexicon_path, "Exercise lexicon TSV");
    train_cmd->add_option("--patterns", patterns_path, "Score pattern file");

    auto* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic cohort");
    add_global_flags(simulate_cmd, opts);
    std::size_t sim_patients = 0;
    simulate_cmd->add_option("--patients", sim_patients, "Cohort size override");

    auto* replay_cmd =
        app.add_subcommand("replay", "Build a minimal cohort reproducing one 2x2 table");
    add_global_flags(replay_cmd, opts);
    std::vector<long> counts;
    std::string feature, domain_name = "BM", stage_name = "EARLY";
    replay_cmd->add_option("--counts", counts, "Cells a b c d")->expected(4)->required();
    replay_cmd->add_option("--feature", feature, "Exercise canonical or demographic level")
        ->required();
    replay_cmd->add_option("--domain", domain_name, "BM or AC");
    replay_cmd->add_option("--stage", stage_name, "EARLY or LATE");

    auto* report_cmd = app.add_subcommand("report", "Bundle run artifacts into markdown");
    add_global_flags(report_cmd, opts);

    CLI11_PARSE(app, argc, argv);

    if (parse_cmd->parsed() || analyze_cmd->parsed() || train_cmd->parsed()) {
        const auto cfg = make_pipeline_config(opts, notes_path, demographics_path, lexicon_path,
                                              patterns_path);
        std::vector<std::string> written;
        if (parse_cmd->parsed()) written = pipeline::run_parse(cfg);
        else if (analyze_cmd->parsed()) written = pipeline::run_analyze(cfg);
        else written = pipeline::run_train_eval(cfg);
        print_written(cfg.out_dir, written);
        return 0;
    }

    if (simulate_cmd->parsed()) {
        synth::SynthConfig cfg;
        if (!opts.config_path.empty()) cfg = synth::load_config(opts.config_path);
        if (opts.seed_set) cfg.seed = opts.seed;
        if (sim_patients > 0) cfg.n_patients = sim_patients;
        const std::string out_dir = resolve_out(opts.out_dir, "");
        print_written(out_dir, pipeline::run_simulate(cfg, out_dir));
        return 0;
    }

    if (replay_cmd->parsed()) {
        stats::ContingencyTable2x2 table{counts[0], counts[1], counts[2], counts[3]};
        const std::string out_dir = resolve_out(opts.out_dir, "");
        print_written(out_dir, pipeline::run_replay(table, feature, parse_stage(stage_name),
                                                    parse_domain(domain_name), out_dir));
        return 0;
    }

    const std::string out_dir = resolve_out(opts.out_dir, "");
    print_written(out_dir, pipeline::run_report(out_dir));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const rehab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    } catch (const rehab::FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return 2;
    } catch (const rehab::notes::PatternError& e) {
        std::cerr << "pattern error: " << e.what() << '\n';
        return 2;
    } catch (const rehab::models::ClassTooSmall& e) {
        std::cerr << "data error: " << e.what()
                  << " (need more patients per class; lower the MCID factor or merge stages)\n";
        return 1;
    } catch (const rehab::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 1;
    } catch (const rehab::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
