#include "rehab/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "rehab/io.hpp"

namespace rehab::pipeline {

namespace fs = std::filesystem;
using io::csv_quote;
using io::format_double;
using nlohmann::json;

namespace {

const Domain kDomains[2] = {Domain::BM, Domain::AC};
const Stage kStages[2] = {Stage::EARLY, Stage::LATE};

std::vector<models::ModelKind> all_models() {
    return {models::ModelKind::LR, models::ModelKind::ADB, models::ModelKind::SVM,
            models::ModelKind::GB, models::ModelKind::RF};
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

void ensure_out_dir(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir + "'");
}

void write_artifact(const std::string& out_dir, const std::string& name,
                    const std::string& content, std::vector<std::string>& written) {
    io::write_text_file((fs::path(out_dir) / name).string(), content);
    written.push_back(name);
}

std::map<std::string, std::string> parse_kv(const std::string& content,
                                            const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::istringstream in(content);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(origin + ": expected key = value", line_no);
        }
        auto trim = [](std::string s) {
            const std::size_t x = s.find_first_not_of(" \t");
            if (x == std::string::npos) return std::string();
            const std::size_t y = s.find_last_not_of(" \t");
            return s.substr(x, y - x + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw FormatError(origin + ": empty key", line_no);
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

double parse_number(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("pipeline config: bad number for '" + key + "': " + value);
    }
}

bool parse_bool(const std::string& value, const std::string& key) {
    const std::string v = lower(value);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("pipeline config: bad boolean for '" + key + "': " + value);
}

}  // namespace

void PipelineConfig::validate() const {
    if (!(mcid_factor > 0.0)) throw ConfigError("pipeline: mcid_factor must be > 0");
    if (!(p_threshold > 0.0 && p_threshold <= 1.0)) {
        throw ConfigError("pipeline: p_threshold must be in (0, 1]");
    }
    if (binning.window_days < 0 || binning.month1_days <= 0 ||
        binning.month2_days <= binning.month1_days) {
        throw ConfigError("pipeline: binning days must satisfy 0 < month1 < month2, window >= 0");
    }
    if (folds < 2) throw ConfigError("pipeline: folds must be >= 2");
    if (threads < 1) throw ConfigError("pipeline: threads must be >= 1");
}

PipelineConfig parse_config(const std::string& content, const std::string& origin) {
    PipelineConfig cfg;
    for (const auto& [key, value] : parse_kv(content, origin)) {
        if (key == "notes") cfg.notes_path = value;
        else if (key == "demographics") cfg.demographics_path = value;
        else if (key == "lexicon") cfg.lexicon_path = value;
        else if (key == "patterns") cfg.patterns_path = value;
        else if (key == "out") cfg.out_dir = value;
        else if (key == "mcid_factor") cfg.mcid_factor = parse_number(value, key);
        else if (key == "p_threshold") cfg.p_threshold = parse_number(value, key);
        else if (key == "yates") cfg.yates = parse_bool(value, key);
        else if (key == "month1_days") cfg.binning.month1_days = static_cast<int>(parse_number(value, key));
        else if (key == "month2_days") cfg.binning.month2_days = static_cast<int>(parse_number(value, key));
        else if (key == "window_days") cfg.binning.window_days = static_cast<int>(parse_number(value, key));
        else if (key == "folds") cfg.folds = static_cast<std::size_t>(parse_number(value, key));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_number(value, key));
        else if (key == "threads") cfg.threads = static_cast<int>(parse_number(value, key));
        else if (key == "models") {
            std::istringstream items(value);
            std::string item;
            while (std::getline(items, item, ',')) {
                const std::size_t x = item.find_first_not_of(" \t");
                if (x == std::string::npos) continue;
                const std::size_t y = item.find_last_not_of(" \t");
                try {
                    cfg.model_list.push_back(
                        models::model_kind_from_name(item.substr(x, y - x + 1)));
                } catch (const DataError& e) {
                    throw ConfigError(std::string("pipeline config: ") + e.what());
                }
            }
        } else if (key == "rf_trees") cfg.params.rf_trees = static_cast<int>(parse_number(value, key));
        else if (key == "rf_max_depth") cfg.params.rf_max_depth = static_cast<int>(parse_number(value, key));
        else if (key == "gb_rounds") cfg.params.gb_rounds = static_cast<int>(parse_number(value, key));
        else if (key == "gb_depth") cfg.params.gb_depth = static_cast<int>(parse_number(value, key));
        else if (key == "gb_shrinkage") cfg.params.gb_shrinkage = parse_number(value, key);
        else if (key == "adb_rounds") cfg.params.adb_rounds = static_cast<int>(parse_number(value, key));
        else if (key == "adb_learning_rate") cfg.params.adb_learning_rate = parse_number(value, key);
        else if (key == "lr_lambda") cfg.params.lr_lambda = parse_number(value, key);
        else if (key == "lr_max_iters") cfg.params.lr_max_iters = static_cast<int>(parse_number(value, key));
        else if (key == "svm_lambda") cfg.params.svm_lambda = parse_number(value, key);
        else if (key == "svm_iters") cfg.params.svm_iters = static_cast<int>(parse_number(value, key));
        else throw ConfigError("pipeline config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    return parse_config(io::read_text_file(path), path);
}

Inputs load_inputs(const PipelineConfig& config) {
    Inputs in;
    if (config.notes_path.empty()) throw ConfigError("pipeline: notes path is required");
    if (config.demographics_path.empty()) {
        throw ConfigError("pipeline: demographics path is required");
    }
    in.note_list = io::read_notes_jsonl(config.notes_path);
    in.demographics = io::read_demographics_csv(config.demographics_path);
    in.lexicon = config.lexicon_path.empty() ? notes::default_lexicon()
                                             : notes::load_lexicon(config.lexicon_path);
    in.patterns = config.patterns_path.empty() ? notes::default_patterns()
                                               : notes::load_patterns(config.patterns_path);
    return in;
}

std::vector<std::string> run_parse(const PipelineConfig& config) {
    if (config.notes_path.empty()) throw ConfigError("pipeline: notes path is required");
    const auto note_list = io::read_notes_jsonl(config.notes_path);
    const auto lexicon = config.lexicon_path.empty() ? notes::default_lexicon()
                                                     : notes::load_lexicon(config.lexicon_path);
    const auto patterns = config.patterns_path.empty()
                              ? notes::default_patterns()
                              : notes::load_patterns(config.patterns_path);

    std::ostringstream csv;
    csv << "patient_id,date,kind,name,value,span_begin,span_end\n";
    for (const auto& note : note_list) {
        for (const auto& obs : notes::extract_ampac(note, patterns)) {
            csv << csv_quote(note.patient_id) << ',' << note.note_date.to_string() << ",AMPAC,"
                << notes::domain_name(obs.domain) << ',' << format_double(obs.score, 10)
                << ",,\n";
        }
        const auto extraction = notes::extract_exercises(note, lexicon);
        for (const auto& mention : extraction.mentions) {
            csv << csv_quote(note.patient_id) << ',' << note.note_date.to_string()
                << ",EXERCISE," << csv_quote(mention.canonical_name) << ','
                << csv_quote(mention.matched_phrase) << ',' << mention.span_begin << ','
                << mention.span_end << '\n';
        }
    }
    ensure_out_dir(config.out_dir);
    std::vector<std::string> written;
    write_artifact(config.out_dir, "extractions.csv", csv.str(), written);
    return written;
}

namespace {

// quartile with linear interpolation between order statistics
double quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string association_csv(const std::vector<stats::AssociationResult>& results) {
    std::ostringstream csv;
    csv << "feature,level,improved_n,improved_pct,notimproved_n,notimproved_pct,"
           "p_value,method,or,ci_low,ci_high\n";
    for (const auto& r : results) {
        const auto& t = r.table;
        const double imp_pct = t.improved() > 0
                                   ? 100.0 * static_cast<double>(t.a) /
                                         static_cast<double>(t.improved())
                                   : 0.0;
        const double not_pct = t.not_improved() > 0
                                   ? 100.0 * static_cast<double>(t.c) /
                                         static_cast<double>(t.not_improved())
                                   : 0.0;
        const auto& cor = r.conditional_or;
        csv << csv_quote(r.feature_kind) << ',' << csv_quote(r.feature) << ',' << t.a << ','
            << format_double(imp_pct, 4) << ',' << t.c << ',' << format_double(not_pct, 4)
            << ',' << format_double(r.test.p_value, 6) << ',' << stats::method_name(r.test.method)
            << ',' << format_double(cor.defined ? cor.or_value : std::nan(""), 6) << ','
            << format_double(cor.defined ? cor.ci_low : std::nan(""), 6) << ','
            << format_double(cor.defined ? cor.ci_high : std::nan(""), 6) << '\n';
    }
    return csv.str();
}

}  // namespace

std::string render_box_plot_svg(const std::string& title,
                                const std::vector<std::string>& group_names,
                                const std::vector<std::vector<double>>& groups) {
    const int width = 520, height = 360;
    const double plot_left = 60, plot_right = 490, plot_top = 50, plot_bottom = 320;

    double lo = 0.0, hi = 1.0;
    bool any = false;
    for (const auto& g : groups) {
        for (double v : g) {
            if (!any) { lo = hi = v; any = true; }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!any) { lo = 0.0; hi = 1.0; }
    if (hi - lo < 1e-9) { lo -= 1.0; hi += 1.0; }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto y_of = [&](double v) {
        return plot_bottom - (v - lo) / (hi - lo) * (plot_bottom - plot_top);
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\" "
           "font-family=\"sans-serif\">" << title << "</text>\n";
    svg << "<line x1=\"" << plot_left << "\" y1=\"" << plot_bottom << "\" x2=\"" << plot_right
        << "\" y2=\"" << plot_bottom << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << plot_left << "\" y1=\"" << plot_top << "\" x2=\"" << plot_left
        << "\" y2=\"" << plot_bottom << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = lo + (hi - lo) * tick / 4.0;
        const double y = y_of(v);
        svg << "<line x1=\"" << plot_left - 4 << "\" y1=\"" << format_double(y, 6)
            << "\" x2=\"" << plot_left << "\" y2=\"" << format_double(y, 6)
            << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << plot_left - 8 << "\" y=\"" << format_double(y + 4, 6)
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
            << format_double(v, 4) << "</text>\n";
    }

    const std::size_t k = groups.size();
    for (std::size_t i = 0; i < k; ++i) {
        const double cx = plot_left + (plot_right - plot_left) * (static_cast<double>(i) + 0.5) /
                                          static_cast<double>(std::max<std::size_t>(k, 1));
        const double half = 28.0;
        svg << "<text x=\"" << format_double(cx, 6) << "\" y=\"" << plot_bottom + 20
            << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
            << (i < group_names.size() ? group_names[i] : "") << "</text>\n";
        std::vector<double> sorted = groups[i];
        if (sorted.empty()) continue;
        std::sort(sorted.begin(), sorted.end());
        const double q1 = quantile(sorted, 0.25);
        const double q2 = quantile(sorted, 0.5);
        const double q3 = quantile(sorted, 0.75);
        const double iqr = q3 - q1;
        double whisker_lo = sorted.front(), whisker_hi = sorted.back();
        for (double v : sorted) {
            if (v >= q1 - 1.5 * iqr) { whisker_lo = v; break; }
        }
        for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
            if (*it <= q3 + 1.5 * iqr) { whisker_hi = *it; break; }
        }
        double mean = 0.0;
        for (double v : sorted) mean += v;
        mean /= static_cast<double>(sorted.size());

        svg << "<line x1=\"" << format_double(cx, 6) << "\" y1=\""
            << format_double(y_of(whisker_lo), 6) << "\" x2=\"" << format_double(cx, 6)
            << "\" y2=\"" << format_double(y_of(whisker_hi), 6) << "\" stroke=\"black\"/>\n";
        for (double w : {whisker_lo, whisker_hi}) {
            svg << "<line x1=\"" << format_double(cx - half / 2, 6) << "\" y1=\""
                << format_double(y_of(w), 6) << "\" x2=\"" << format_double(cx + half / 2, 6)
                << "\" y2=\"" << format_double(y_of(w), 6) << "\" stroke=\"black\"/>\n";
        }
        svg << "<rect x=\"" << format_double(cx - half, 6) << "\" y=\""
            << format_double(y_of(q3), 6) << "\" width=\"" << format_double(2 * half, 6)
            << "\" height=\"" << format_double(y_of(q1) - y_of(q3), 6)
            << "\" fill=\"#cfe2f3\" stroke=\"black\"/>\n";
        // median line
        svg << "<line x1=\"" << format_double(cx - half, 6) << "\" y1=\""
            << format_double(y_of(q2), 6) << "\" x2=\"" << format_double(cx + half, 6)
            << "\" y2=\"" << format_double(y_of(q2), 6)
            << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        // mean mark
        svg << "<text x=\"" << format_double(cx, 6) << "\" y=\""
            << format_double(y_of(mean) + 5, 6)
            << "\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\">X"
               "</text>\n";
        // outliers beyond the whiskers
        for (double v : sorted) {
            if (v < whisker_lo || v > whisker_hi) {
                svg << "<circle cx=\"" << format_double(cx, 6) << "\" cy=\""
                    << format_double(y_of(v), 6) << "\" r=\"2.5\" fill=\"none\" "
                       "stroke=\"black\"/>\n";
            }
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string render_roc_svg(const std::string& title, const std::vector<double>& fpr_grid,
                           const std::vector<double>& mean_tpr,
                           const std::vector<double>& sd_tpr, double mean_auc) {
    const int width = 440, height = 440;
    const double left = 60, right = 410, top = 50, bottom = 380;
    auto x_of = [&](double f) { return left + f * (right - left); };
    auto y_of = [&](double t) { return bottom - t * (bottom - top); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"26\" text-anchor=\"middle\" font-size=\"15\" "
           "font-family=\"sans-serif\">" << title << "</text>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"44\" text-anchor=\"middle\" font-size=\"12\" "
           "font-family=\"sans-serif\">mean AUC " << format_double(mean_auc, 4)
        << "</text>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\""
        << bottom << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << bottom << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << (left + right) / 2 << "\" y=\"" << bottom + 32
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
           "false positive rate</text>\n";
    svg << "<line x1=\"" << format_double(x_of(0), 6) << "\" y1=\"" << format_double(y_of(0), 6)
        << "\" x2=\"" << format_double(x_of(1), 6) << "\" y2=\"" << format_double(y_of(1), 6)
        << "\" stroke=\"#999999\" stroke-dasharray=\"4,3\"/>\n";

    // +/- one SD band as a closed polygon
    std::ostringstream band;
    for (std::size_t i = 0; i < fpr_grid.size(); ++i) {
        const double t = std::min(1.0, mean_tpr[i] + sd_tpr[i]);
        band << format_double(x_of(fpr_grid[i]), 6) << ',' << format_double(y_of(t), 6) << ' ';
    }
    for (std::size_t i = fpr_grid.size(); i-- > 0;) {
        const double t = std::max(0.0, mean_tpr[i] - sd_tpr[i]);
        band << format_double(x_of(fpr_grid[i]), 6) << ',' << format_double(y_of(t), 6) << ' ';
    }
    svg << "<polygon points=\"" << band.str() << "\" fill=\"#cfe2f3\" stroke=\"none\"/>\n";

    std::ostringstream line;
    for (std::size_t i = 0; i < fpr_grid.size(); ++i) {
        line << format_double(x_of(fpr_grid[i]), 6) << ','
             << format_double(y_of(mean_tpr[i]), 6) << ' ';
    }
    svg << "<polyline points=\"" << line.str()
        << "\" fill=\"none\" stroke=\"#1f4e99\" stroke-width=\"2\"/>\n";
    svg << "</svg>\n";
    return svg.str();
}

std::vector<std::string> run_analyze(const PipelineConfig& config) {
    const Inputs in = load_inputs(config);
    const auto records =
        cohort::assemble(in.note_list, in.demographics, in.lexicon, in.patterns, config.binning);

    ensure_out_dir(config.out_dir);
    std::vector<std::string> written;

    std::ostringstream mcid_csv;
    mcid_csv << "domain,pooled_n,pooled_sd,mcid\n";
    std::map<Domain, outcomes::McidEstimate> mcid;
    for (Domain d : kDomains) {
        try {
            mcid[d] = outcomes::estimate_mcid(records, d, config.mcid_factor);
            mcid_csv << notes::domain_name(d) << ',' << mcid[d].pooled_n << ','
                     << format_double(mcid[d].pooled_sd, 6) << ','
                     << format_double(mcid[d].mcid, 6) << '\n';
        } catch (const outcomes::InsufficientData&) {
            mcid_csv << notes::domain_name(d) << ",0,NA,NA\n";
        }
    }
    write_artifact(config.out_dir, "mcid.csv", mcid_csv.str(), written);

    std::ostringstream outcome_csv;
    outcome_csv << "patient_id,domain,stage,delta,label\n";
    std::ostringstream tests_csv;
    tests_csv << "domain,test,timepoints,statistic,p_value,n\n";

    for (Domain d : kDomains) {
        if (!mcid.count(d)) {
            // no scores at all for this domain; emit headers-only artifacts
            tests_csv << notes::domain_name(d) << ",FRIEDMAN,T0:M1:M2,NA,NA,0\n";
            for (Stage s : kStages) {
                write_artifact(config.out_dir,
                               std::string("associations_") + notes::domain_name(d) + "_" +
                                   cohort::stage_name(s) + ".csv",
                               association_csv({}), written);
            }
            continue;
        }
        // Friedman over complete T0/M1/M2 rows
        std::vector<std::vector<double>> complete_rows;
        std::vector<std::vector<double>> groups(3);
        for (const auto& rec : records) {
            const auto t0 = rec.score(d, cohort::Timepoint::T0);
            const auto m1 = rec.score(d, cohort::Timepoint::M1);
            const auto m2 = rec.score(d, cohort::Timepoint::M2);
            if (t0) groups[0].push_back(*t0);
            if (m1) groups[1].push_back(*m1);
            if (m2) groups[2].push_back(*m2);
            if (t0 && m1 && m2) complete_rows.push_back({*t0, *m1, *m2});
        }
        try {
            const auto fr = stats::friedman_test(complete_rows);
            tests_csv << notes::domain_name(d) << ",FRIEDMAN,T0:M1:M2,"
                      << format_double(fr.statistic.value_or(std::nan("")), 6) << ','
                      << format_double(fr.p_value, 6) << ',' << complete_rows.size() << '\n';
        } catch (const stats::InsufficientRows&) {
            tests_csv << notes::domain_name(d) << ",FRIEDMAN,T0:M1:M2,NA,NA,"
                      << complete_rows.size() << '\n';
        }

        const std::pair<cohort::Timepoint, cohort::Timepoint> pairs_def[3] = {
            {cohort::Timepoint::T0, cohort::Timepoint::M1},
            {cohort::Timepoint::M1, cohort::Timepoint::M2},
            {cohort::Timepoint::T0, cohort::Timepoint::M2}};
        for (const auto& [ta, tb] : pairs_def) {
            std::vector<std::pair<double, double>> pairs;
            for (const auto& rec : records) {
                const auto va = rec.score(d, ta);
                const auto vb = rec.score(d, tb);
                if (va && vb) pairs.emplace_back(*va, *vb);
            }
            const std::string label = std::string(cohort::timepoint_name(ta)) + ":" +
                                      cohort::timepoint_name(tb);
            try {
                const auto w = stats::wilcoxon_signed_rank(pairs);
                tests_csv << notes::domain_name(d) << ',' << stats::method_name(w.method) << ','
                          << label << ',' << format_double(w.statistic.value_or(std::nan("")), 6)
                          << ',' << format_double(w.p_value, 6) << ',' << pairs.size() << '\n';
            } catch (const DataError&) {
                tests_csv << notes::domain_name(d) << ",WILCOXON," << label << ",NA,NA,"
                          << pairs.size() << '\n';
            }
        }

        write_artifact(config.out_dir,
                       std::string("boxplot_") + notes::domain_name(d) + ".svg",
                       render_box_plot_svg(std::string("AM-PAC ") + notes::domain_name(d) +
                                               " by timepoint",
                                           {"T0", "M1", "M2"}, groups),
                       written);

        for (Stage s : kStages) {
            const auto population = cohort::stage_population(records, d, s);
            const auto outcome_list = outcomes::label_outcomes(population, d, s, mcid[d]);
            for (const auto& o : outcome_list) {
                outcome_csv << csv_quote(o.patient_id) << ',' << notes::domain_name(d) << ','
                            << cohort::stage_name(s) << ',' << format_double(o.delta, 6) << ','
                            << outcomes::label_name(o.label) << '\n';
            }
            stats::ScreenConfig screen;
            screen.p_threshold = config.p_threshold;
            screen.yates = config.yates;
            const auto exposures = stats::feature_exposures(population, in.lexicon, s);
            const auto results = stats::association_screen(outcome_list, exposures, screen);
            write_artifact(config.out_dir,
                           std::string("associations_") + notes::domain_name(d) + "_" +
                               cohort::stage_name(s) + ".csv",
                           association_csv(results), written);
        }
    }
    write_artifact(config.out_dir, "outcomes.csv", outcome_csv.str(), written);
    write_artifact(config.out_dir, "score_tests.csv", tests_csv.str(), written);
    std::sort(written.begin(), written.end());
    return written;
}

std::vector<std::string> run_train_eval(const PipelineConfig& config) {
    const Inputs in = load_inputs(config);
    const auto records =
        cohort::assemble(in.note_list, in.demographics, in.lexicon, in.patterns, config.binning);
    const auto model_list = config.model_list.empty() ? all_models() : config.model_list;

    struct Cell {
        Domain domain;
        Stage stage;
        models::ModelKind kind;
        std::uint64_t seed;
        models::CvReport report;
        std::string model_json;
        std::string error;
    };

    std::vector<Cell> cells;
    std::map<std::pair<Domain, Stage>, models::FeatureMatrix> features;
    for (Domain d : kDomains) {
        for (Stage s : kStages) {
            const auto population = cohort::stage_population(records, d, s);
            const auto mcid = outcomes::estimate_mcid(records, d, config.mcid_factor);
            const auto outcome_list = outcomes::label_outcomes(population, d, s, mcid);
            features[{d, s}] = models::build_features(population, outcome_list, in.lexicon, s);
        }
    }
    std::uint64_t cell_index = 0;
    for (Domain d : kDomains) {
        for (Stage s : kStages) {
            for (models::ModelKind kind : model_list) {
                Cell cell;
                cell.domain = d;
                cell.stage = s;
                cell.kind = kind;
                cell.seed = derive_seed(config.seed, 1000 + cell_index++);
                cells.push_back(std::move(cell));
            }
        }
    }

    auto run_cell = [&](Cell& cell) {
        const auto& fm = features.at({cell.domain, cell.stage});
        models::ModelSpec spec;
        spec.kind = cell.kind;
        spec.params = config.params;
        spec.seed = cell.seed;
        try {
            cell.report = models::cross_validate(spec, fm, config.folds, cell.seed);
            // persist a model fit on the full (oversampled) population
            auto rows = fm.rows;
            auto labels = fm.labels;
            models::oversample(rows, labels, derive_seed(cell.seed, 7));
            models::ModelSpec full = spec;
            full.seed = derive_seed(cell.seed, 8);
            cell.model_json = models::train(full, rows, labels)->to_json();
        } catch (const DataError& e) {
            cell.error = e.what();
        }
    };

    const int threads = std::min<int>(config.threads, static_cast<int>(cells.size()));
    if (threads <= 1) {
        for (Cell& cell : cells) run_cell(cell);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= cells.size()) return;
                    run_cell(cells[i]);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    ensure_out_dir(config.out_dir);
    std::vector<std::string> written;
    std::ostringstream metrics_csv, roc_csv;
    metrics_csv << "domain,stage,model,precision,recall,f1,auc,accuracy\n";
    roc_csv << "domain,stage,model,fpr,mean_tpr,sd_tpr\n";
    for (const Cell& cell : cells) {
        const std::string d = notes::domain_name(cell.domain);
        const std::string s = cohort::stage_name(cell.stage);
        const std::string m = models::model_kind_name(cell.kind);
        if (!cell.error.empty()) {
            throw DataError("train-eval " + d + "/" + s + "/" + m + ": " + cell.error);
        }
        const auto& agg = cell.report.aggregate;
        metrics_csv << d << ',' << s << ',' << m << ',' << format_double(agg.precision, 6)
                    << ',' << format_double(agg.recall, 6) << ',' << format_double(agg.f1, 6)
                    << ',' << format_double(agg.auc, 6) << ','
                    << format_double(agg.accuracy, 6) << '\n';
        for (std::size_t i = 0; i < cell.report.fpr_grid.size(); ++i) {
            roc_csv << d << ',' << s << ',' << m << ','
                    << format_double(cell.report.fpr_grid[i], 6) << ','
                    << format_double(cell.report.mean_tpr[i], 6) << ','
                    << format_double(cell.report.sd_tpr[i], 6) << '\n';
        }
        write_artifact(config.out_dir, "roc_" + d + "_" + s + "_" + m + ".svg",
                       render_roc_svg("ROC " + d + " " + s + " " + m, cell.report.fpr_grid,
                                      cell.report.mean_tpr, cell.report.sd_tpr,
                                      cell.report.mean_auc),
                       written);
        write_artifact(config.out_dir, "model_" + d + "_" + s + "_" + m + ".json",
                       cell.model_json, written);
    }
    write_artifact(config.out_dir, "metrics.csv", metrics_csv.str(), written);
    write_artifact(config.out_dir, "roc.csv", roc_csv.str(), written);
    std::sort(written.begin(), written.end());
    return written;
}

namespace {

void write_cohort_files(const synth::SynthOutput& out, const std::string& out_dir,
                        std::vector<std::string>& written, bool with_truth) {
    ensure_out_dir(out_dir);
    io::write_notes_jsonl((fs::path(out_dir) / "notes.jsonl").string(), out.note_list);
    written.push_back("notes.jsonl");
    io::write_demographics_csv((fs::path(out_dir) / "demographics.csv").string(),
                               out.demographics);
    written.push_back("demographics.csv");
    if (!with_truth) return;
    json truth;
    truth["ampac_observation_count"] = out.truth.ampac_observation_count;
    json improved = json::object();
    for (const auto& [id, by_domain] : out.truth.improved) {
        json entry = json::object();
        for (const auto& [d, by_stage] : by_domain) {
            json stages = json::object();
            for (const auto& [s, flag] : by_stage) stages[cohort::stage_name(s)] = flag;
            entry[notes::domain_name(d)] = std::move(stages);
        }
        improved[id] = std::move(entry);
    }
    truth["improved"] = std::move(improved);
    json exposures = json::object();
    for (const auto& [id, by_stage] : out.truth.exposures) {
        json entry = json::object();
        for (const auto& [s, names] : by_stage) {
            entry[cohort::stage_name(s)] = std::vector<std::string>(names.begin(), names.end());
        }
        exposures[id] = std::move(entry);
    }
    truth["exposures"] = std::move(exposures);
    io::write_text_file((fs::path(out_dir) / "truth.json").string(), truth.dump(2) + "\n");
    written.push_back("truth.json");
}

}  // namespace

std::vector<std::string> run_simulate(const synth::SynthConfig& config,
                                      const std::string& out_dir) {
    std::vector<std::string> written;
    write_cohort_files(synth::generate(config), out_dir, written, true);
    return written;
}

std::vector<std::string> run_replay(const stats::ContingencyTable2x2& counts,
                                    const std::string& feature, Stage stage, Domain domain,
                                    const std::string& out_dir) {
    std::vector<std::string> written;
    write_cohort_files(synth::replay_table(counts, feature, stage, domain), out_dir, written,
                       false);
    return written;
}

namespace {

void append_csv_as_table(std::ostringstream& md, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t cols = 1;
        md << "| ";
        for (char c : line) {
            if (c == ',') { md << " | "; ++cols; }
            else md << c;
        }
        md << " |\n";
        if (first) {
            md << "|";
            for (std::size_t i = 0; i < cols; ++i) md << " --- |";
            md << '\n';
            first = false;
        }
    }
}

}  // namespace

std::vector<std::string> run_report(const std::string& out_dir) {
    ensure_out_dir(out_dir);
    std::ostringstream md;
    md << "# Rehabilitation analysis report\n";
    std::vector<std::string> missing;

    auto have = [&](const std::string& name) {
        return fs::exists(fs::path(out_dir) / name);
    };
    auto section_csv = [&](const std::string& heading, const std::string& name) {
        md << "\n## " << heading << "\n\n";
        if (!have(name)) {
            md << "`" << name << "` not present.\n";
            missing.push_back(name);
            return;
        }
        append_csv_as_table(md, (fs::path(out_dir) / name).string());
    };

    section_csv("MCID estimates", "mcid.csv");
    section_csv("Score trajectory tests", "score_tests.csv");
    for (const char* d : {"BM", "AC"}) {
        for (const char* s : {"EARLY", "LATE"}) {
            section_csv(std::string("Associations: ") + d + " " + s,
                        std::string("associations_") + d + "_" + s + ".csv");
        }
    }
    section_csv("Model metrics", "metrics.csv");

    md << "\n## Figures\n\n";
    std::vector<std::string> svgs;
    for (const auto& entry : fs::directory_iterator(out_dir)) {
        if (entry.path().extension() == ".svg") svgs.push_back(entry.path().filename().string());
    }
    std::sort(svgs.begin(), svgs.end());
    if (svgs.empty()) md << "No figures present.\n";
    for (const auto& name : svgs) md << "- ![" << name << "](" << name << ")\n";

    if (!missing.empty()) {
        md << "\n## Missing artifacts\n\n";
        for (const auto& name : missing) md << "- " << name << '\n';
    } else {
        md << "\n_All expected artifacts were present._\n";
    }

    std::vector<std::string> written;
    write_artifact(out_dir, "report.md", md.str(), written);
    return written;
}

}  // namespace rehab::pipeline
