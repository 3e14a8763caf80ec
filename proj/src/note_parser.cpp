#include "rehab/note_parser.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace rehab::notes {

namespace {

std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string to_upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

const char* domain_name(Domain d) {
    return d == Domain::BM ? "BM" : "AC";
}

std::vector<std::string> ExerciseLexicon::canonical_names() const {
    std::vector<std::string> names;
    names.reserve(entries.size());
    for (const auto& e : entries) names.push_back(e.canonical);
    return names;
}

ExerciseLexicon parse_lexicon(const std::string& content, const std::string& origin) {
    std::vector<std::string> lines = split(content, '\n');
    ExerciseLexicon lex;
    std::unordered_set<std::string> seen;
    bool saw_header = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const long line_no = static_cast<long>(i + 1);
        std::string line = lines[i];
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (!saw_header) {
            if (to_lower(trim(line)) != "canonical\tcategory\tphrases") {
                throw FormatError(origin + ": expected header 'canonical\\tcategory\\tphrases'",
                                  line_no);
            }
            saw_header = true;
            continue;
        }
        std::vector<std::string> fields = split(line, '\t');
        if (fields.size() != 3) {
            throw FormatError(origin + ": expected 3 tab-separated fields", line_no);
        }
        LexiconEntry entry;
        entry.canonical = to_upper(trim(fields[0]));
        entry.category = trim(fields[1]);
        if (entry.canonical.empty()) {
            throw FormatError(origin + ": empty canonical name", line_no);
        }
        if (!seen.insert(entry.canonical).second) {
            throw DuplicateCanonicalName(
                origin + ": duplicate canonical name '" + entry.canonical + "'", line_no);
        }
        for (const std::string& raw : split(fields[2], '|')) {
            std::string phrase = to_lower(trim(raw));
            if (!phrase.empty()) entry.key_phrases.push_back(phrase);
        }
        if (entry.key_phrases.empty()) {
            throw FormatError(origin + ": entry has no key phrases", line_no);
        }
        lex.entries.push_back(std::move(entry));
    }
    if (!saw_header || lex.entries.empty()) {
        throw FormatError(origin + ": lexicon has no entries");
    }
    return lex;
}

ExerciseLexicon load_lexicon(const std::string& path) {
    return parse_lexicon(read_file(path), path);
}

PatternSet compile_patterns(const std::vector<std::string>& patterns) {
    PatternSet set;
    for (const std::string& p : patterns) {
        try {
            set.compiled.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
        } catch (const std::regex_error& e) {
            throw PatternError("bad pattern '" + p + "': " + e.what());
        }
        if (set.compiled.back().mark_count() < 2) {
            set.compiled.pop_back();
            throw PatternError("pattern '" + p +
                               "' needs a domain-tag capture and a numeric capture");
        }
        set.sources.push_back(p);
    }
    return set;
}

PatternSet load_patterns(const std::string& path) {
    std::vector<std::string> lines = split(read_file(path), '\n');
    std::vector<std::string> patterns;
    for (std::string line : lines) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        patterns.push_back(line);
    }
    return compile_patterns(patterns);
}

std::vector<AmpacObservation> extract_ampac(const ProcedureNote& note,
                                            const PatternSet& patterns) {
    struct RawMatch {
        std::size_t begin;
        std::size_t end;
        AmpacObservation obs;
    };
    std::vector<RawMatch> raw;
    for (const std::regex& re : patterns.compiled) {
        auto begin = std::sregex_iterator(note.text.begin(), note.text.end(), re);
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            const std::smatch& m = *it;
            const std::string tag = to_lower(m[1].str());
            Domain domain;
            if (tag == "bm" || tag == "basic mobility") {
                domain = Domain::BM;
            } else if (tag == "ac" || tag == "applied cognitive") {
                domain = Domain::AC;
            } else {
                continue;  // pattern captured an unrecognized tag
            }
            const double score = std::strtod(m[2].str().c_str(), nullptr);
            raw.push_back({static_cast<std::size_t>(m.position(0)),
                           static_cast<std::size_t>(m.position(0) + m.length(0)),
                           AmpacObservation{domain, score, note.note_date}});
        }
    }
    std::stable_sort(raw.begin(), raw.end(),
                     [](const RawMatch& a, const RawMatch& b) { return a.begin < b.begin; });
    std::vector<AmpacObservation> out;
    std::size_t covered = 0;
    for (const RawMatch& m : raw) {
        if (!out.empty() && m.begin < covered) continue;  // overlaps an earlier match
        covered = m.end;
        out.push_back(m.obs);
    }
    return out;
}

ExerciseExtraction extract_exercises(const ProcedureNote& note,
                                     const ExerciseLexicon& lexicon) {
    struct Candidate {
        std::string phrase;  // lowercase
        const LexiconEntry* entry;
        std::size_t entry_index;
    };
    std::vector<Candidate> candidates;
    for (std::size_t ei = 0; ei < lexicon.entries.size(); ++ei) {
        for (const std::string& p : lexicon.entries[ei].key_phrases) {
            candidates.push_back({p, &lexicon.entries[ei], ei});
        }
    }
    // Longest phrase wins at each offset; lexicon order breaks length ties.
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.phrase.size() != b.phrase.size()) return a.phrase.size() > b.phrase.size();
        return a.entry_index < b.entry_index;
    });

    const std::string text = to_lower(note.text);
    const std::size_t n = text.size();
    ExerciseExtraction result;
    std::size_t i = 0;
    while (i < n) {
        bool matched = false;
        for (const Candidate& c : candidates) {
            const std::size_t len = c.phrase.size();
            if (i + len > n) continue;
            if (text.compare(i, len, c.phrase) != 0) continue;
            // word boundaries required only next to alphanumeric phrase edges
            if (is_word_char(c.phrase.front()) && i > 0 && is_word_char(text[i - 1])) continue;
            if (is_word_char(c.phrase.back()) && i + len < n && is_word_char(text[i + len]))
                continue;
            result.mentions.push_back(
                {c.entry->canonical, c.phrase, i, i + len});
            result.canonicals.insert(c.entry->canonical);
            i += len;
            matched = true;
            break;
        }
        if (!matched) ++i;
    }
    return result;
}

}  // namespace rehab::notes
