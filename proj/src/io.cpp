#include "rehab/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace rehab::io {

using json = nlohmann::json;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << content;
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<notes::ProcedureNote> read_notes_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<notes::ProcedureNote> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError(path + ": invalid JSON: " + e.what(), line_no);
        }
        if (!obj.is_object() || !obj.contains("patient_id") || !obj.contains("date") ||
            !obj.contains("text") || !obj["patient_id"].is_string() ||
            !obj["date"].is_string() || !obj["text"].is_string()) {
            throw FormatError(path + ": expected {patient_id, date, text} strings", line_no);
        }
        notes::ProcedureNote note;
        note.patient_id = obj["patient_id"].get<std::string>();
        try {
            note.note_date = Date::parse(obj["date"].get<std::string>());
        } catch (const FormatError& e) {
            throw FormatError(path + ": " + e.what(), line_no);
        }
        note.text = obj["text"].get<std::string>();
        out.push_back(std::move(note));
    }
    return out;
}

void write_notes_jsonl(const std::string& path, const std::vector<notes::ProcedureNote>& list) {
    std::ostringstream out;
    for (const auto& note : list) {
        json obj{{"patient_id", note.patient_id},
                 {"date", note.note_date.to_string()},
                 {"text", note.text}};
        out << obj.dump() << '\n';
    }
    write_text_file(path, out.str());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    // demographics files carry no quoted fields; plain comma split suffices
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::map<std::string, cohort::Demographics> read_demographics_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::map<std::string, cohort::Demographics> out;
    std::string line;
    long line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != "patient_id,sex,race,age_years") {
                throw FormatError(path + ": expected header patient_id,sex,race,age_years",
                                  line_no);
            }
            saw_header = true;
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 4) {
            throw FormatError(path + ": expected 4 fields", line_no);
        }
        cohort::Demographics demo;
        if (fields[1] == "FEMALE") demo.sex = cohort::Sex::FEMALE;
        else if (fields[1] == "MALE") demo.sex = cohort::Sex::MALE;
        else throw FormatError(path + ": sex must be FEMALE or MALE", line_no);
        if (fields[2] == "WHITE") demo.race = cohort::Race::WHITE;
        else if (fields[2] == "NOT_WHITE") demo.race = cohort::Race::NOT_WHITE;
        else throw FormatError(path + ": race must be WHITE or NOT_WHITE", line_no);
        try {
            demo.age_years = std::stoi(fields[3]);
        } catch (const std::exception&) {
            throw FormatError(path + ": bad age_years '" + fields[3] + "'", line_no);
        }
        if (demo.age_years < 0) throw FormatError(path + ": negative age_years", line_no);
        if (!out.emplace(fields[0], demo).second) {
            throw FormatError(path + ": duplicate patient_id '" + fields[0] + "'", line_no);
        }
    }
    if (!saw_header) throw FormatError(path + ": empty demographics file");
    return out;
}

void write_demographics_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, cohort::Demographics>>& rows) {
    std::ostringstream out;
    out << "patient_id,sex,race,age_years\n";
    for (const auto& [id, demo] : rows) {
        out << csv_quote(id) << ',' << cohort::sex_name(demo.sex) << ','
            << cohort::race_name(demo.race) << ',' << demo.age_years << '\n';
    }
    write_text_file(path, out.str());
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string quoted = "\"";
    for (char c : field) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

std::string format_double(double v, int precision) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

}  // namespace rehab::io
