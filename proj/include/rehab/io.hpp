#pragma once

#include <map>
#include <string>
#include <vector>

#include "rehab/cohort.hpp"

namespace rehab::io {

// Notes: JSON Lines, one {"patient_id", "date", "text"} object per line.
std::vector<notes::ProcedureNote> read_notes_jsonl(const std::string& path);
void write_notes_jsonl(const std::string& path, const std::vector<notes::ProcedureNote>& list);

// Demographics: CSV with header patient_id,sex,race,age_years.
std::map<std::string, cohort::Demographics> read_demographics_csv(const std::string& path);
void write_demographics_csv(const std::string& path,
                            const std::vector<std::pair<std::string, cohort::Demographics>>& rows);

// RFC-4180 quoting for one CSV field.
std::string csv_quote(const std::string& field);

// Locale-independent, deterministic number rendering for exported artifacts.
std::string format_double(double v, int precision = 6);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace rehab::io
