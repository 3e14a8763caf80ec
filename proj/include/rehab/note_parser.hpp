#pragma once

#include <cstddef>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "rehab/date.hpp"

namespace rehab::notes {

enum class Domain { BM, AC };

const char* domain_name(Domain d);

// A lexicon row declares a canonical name that already exists.
struct DuplicateCanonicalName : FormatError {
    using FormatError::FormatError;
};

// An AM-PAC pattern failed to compile or lacks the two capture groups.
struct PatternError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProcedureNote {
    std::string patient_id;
    Date note_date;
    std::string text;
};

struct AmpacObservation {
    Domain domain;
    double score = 0.0;
    Date source_date;
};

struct LexiconEntry {
    std::string canonical;  // uppercase, unique
    std::string category;
    std::vector<std::string> key_phrases;
};

struct ExerciseLexicon {
    std::vector<LexiconEntry> entries;

    std::size_t size() const { return entries.size(); }
    std::vector<std::string> canonical_names() const;
};

struct ExerciseMention {
    std::string canonical_name;
    std::string matched_phrase;
    std::size_t span_begin = 0;  // byte offsets into the note text
    std::size_t span_end = 0;
};

struct ExerciseExtraction {
    std::set<std::string> canonicals;
    std::vector<ExerciseMention> mentions;  // document order
};

// Compiled AM-PAC score patterns. Each regex must expose two capture groups:
// group 1 a domain tag (basic mobility|bm|applied cognitive|ac, any case) and
// group 2 a decimal number.
struct PatternSet {
    std::vector<std::string> sources;
    std::vector<std::regex> compiled;
};

// Lexicon TSV: header "canonical\tcategory\tphrases", phrases '|'-separated.
ExerciseLexicon load_lexicon(const std::string& path);
ExerciseLexicon parse_lexicon(const std::string& content, const std::string& origin);
// The appendix lexicon shipped with the library.
const ExerciseLexicon& default_lexicon();
// Raw TSV of the default lexicon (what load_lexicon would read back).
const std::string& default_lexicon_tsv();
// Raw text of the default pattern file.
const std::string& default_patterns_text();

// Pattern files: one regex per line, '#' comments and blank lines ignored.
PatternSet compile_patterns(const std::vector<std::string>& patterns);
PatternSet load_patterns(const std::string& path);
const PatternSet& default_patterns();

std::vector<AmpacObservation> extract_ampac(const ProcedureNote& note,
                                            const PatternSet& patterns);

// Case-insensitive, word-boundary, longest-match-wins keyword scan.
// Each text position contributes to at most one mention.
ExerciseExtraction extract_exercises(const ProcedureNote& note,
                                     const ExerciseLexicon& lexicon);

}  // namespace rehab::notes
