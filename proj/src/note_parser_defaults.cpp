#include "rehab/note_parser.hpp"

namespace rehab::notes {

namespace {

std::vector<std::string> pattern_lines(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t pos = text.find('\n', start);
        std::string line =
            pos == std::string::npos ? text.substr(start) : text.substr(start, pos - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t b = line.find_first_not_of(" \t");
        if (b != std::string::npos && line[b] != '#') out.push_back(line.substr(b));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

const ExerciseLexicon& default_lexicon() {
    static const ExerciseLexicon lex = parse_lexicon(default_lexicon_tsv(), "<default lexicon>");
    return lex;
}

const PatternSet& default_patterns() {
    static const PatternSet patterns = compile_patterns(pattern_lines(default_patterns_text()));
    return patterns;
}

}  // namespace rehab::notes
