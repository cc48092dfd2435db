#include "ccsg/text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace ccsg {

using nlohmann::json;

namespace {

bool ascii_punct(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    return u < 128 && ((u >= '!' && u <= '/') || (u >= ':' && u <= '@') ||
                       (u >= '[' && u <= '`') || (u >= '{' && u <= '~'));
}

bool ascii_space(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    return u == ' ' || u == '\t' || u == '\n' || u == '\r' || u == '\f' || u == '\v';
}

void lowercase_ascii(std::string& s) {
    for (char& c : s) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
}

const char* kStopwords[] = {
    "a", "about", "above", "after", "again", "against", "all", "almost", "also", "although",
    "always", "am", "among", "an", "and", "any", "anyone", "anything", "are", "aren't", "around",
    "as", "at", "away", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "came", "can", "cannot", "come", "could", "couldn't", "did", "didn't", "do",
    "does", "doesn't", "doing", "don't", "down", "during", "each", "either", "else", "ever",
    "every", "few", "for", "from", "further", "had", "hadn't", "has", "hasn't", "have", "haven't",
    "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "however",
    "i", "if", "in", "into", "is", "isn't", "it", "its", "itself", "just", "may", "me", "might",
    "more", "most", "much", "must", "mustn't", "my", "myself", "never", "no", "nor", "not", "now",
    "of", "off", "often", "on", "once", "only", "onto", "or", "other", "ought", "our", "ours",
    "ourselves", "out", "over", "own", "same", "shall", "shan't", "she", "should", "shouldn't",
    "since", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves",
    "then", "there", "these", "they", "this", "those", "through", "to", "too", "under", "until",
    "up", "upon", "us", "very", "was", "wasn't", "we", "were", "weren't", "what", "when", "where",
    "which", "while", "who", "whom", "why", "will", "with", "won't", "would", "wouldn't", "yet",
    "you", "your", "yours", "yourself", "yourselves"};

json parse_line(const std::string& line, std::size_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error("dataset line " + std::to_string(line_no) +
                                 ": invalid record: " + e.what());
    }
}

const json& require_field(const json& rec, const char* name, std::size_t line_no) {
    auto it = rec.find(name);
    if (it == rec.end()) {
        throw std::runtime_error("dataset line " + std::to_string(line_no) +
                                 ": missing field '" + name + "'");
    }
    return *it;
}

std::vector<std::string> tag_list(const json& tags, const std::string& id) {
    std::vector<std::string> out;
    if (!tags.is_array()) {
        throw std::runtime_error("record '" + id + "': tags must be an array");
    }
    for (const auto& t : tags) out.push_back(t.get<std::string>());
    return out;
}

void check_tag_alignment(const Statement& s) {
    if (!s.pos_tags.empty() && s.pos_tags.size() != s.tokens.size()) {
        throw std::runtime_error("record '" + s.id + "': " + std::to_string(s.pos_tags.size()) +
                                 " tags for " + std::to_string(s.tokens.size()) + " tokens");
    }
}

}  // namespace

std::string_view origin_name(Origin o) {
    switch (o) {
        case Origin::golden: return "golden";
        case Origin::cf_pos: return "cf_pos";
        case Origin::cf_neg: return "cf_neg";
    }
    return "golden";
}

Origin origin_from_name(std::string_view name) {
    if (name == "golden") return Origin::golden;
    if (name == "cf_pos") return Origin::cf_pos;
    if (name == "cf_neg") return Origin::cf_neg;
    throw std::runtime_error("unknown origin: " + std::string(name));
}

TokenizeResult tokenize(std::string_view text, std::size_t max_tokens) {
    TokenizeResult result;
    std::size_t i = 0;
    std::vector<std::string> trailing;
    while (i < text.size()) {
        while (i < text.size() && ascii_space(text[i])) ++i;
        std::size_t start = i;
        while (i < text.size() && !ascii_space(text[i])) ++i;
        if (i == start) break;
        std::string chunk(text.substr(start, i - start));
        lowercase_ascii(chunk);

        std::size_t lo = 0, hi = chunk.size();
        while (lo < hi && ascii_punct(chunk[lo])) {
            result.tokens.emplace_back(1, chunk[lo]);
            ++lo;
        }
        trailing.clear();
        while (hi > lo && ascii_punct(chunk[hi - 1])) {
            trailing.emplace_back(1, chunk[hi - 1]);
            --hi;
        }
        if (hi > lo) result.tokens.push_back(chunk.substr(lo, hi - lo));
        // trailing punctuation in original order
        for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) {
            result.tokens.push_back(*it);
        }
    }
    if (result.tokens.empty()) {
        throw std::invalid_argument("tokenize: empty input after normalization");
    }
    if (result.tokens.size() > max_tokens) {
        result.tokens.resize(max_tokens);
        result.truncated = true;
    }
    return result;
}

const std::set<std::string>& default_stoplist() {
    static const std::set<std::string> words(std::begin(kStopwords), std::end(kStopwords));
    return words;
}

std::set<std::string> load_stoplist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open stoplist: " + path);
    std::set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        lowercase_ascii(line);
        words.insert(line);
    }
    return words;
}

bool is_noun_tag(std::string_view tag) {
    return tag == "NOUN" || tag == "PROPN" || tag == "NN" || tag == "NNS" || tag == "NNP" ||
           tag == "NNPS";
}

std::vector<std::size_t> extract_nouns(const Statement& statement, const EmbeddingStore& store,
                                       const std::set<std::string>& stoplist) {
    std::vector<std::size_t> indices;
    if (!statement.pos_tags.empty()) {
        for (std::size_t i = 0; i < statement.tokens.size(); ++i) {
            if (is_noun_tag(statement.pos_tags[i])) indices.push_back(i);
        }
        return indices;
    }
    for (std::size_t i = 0; i < statement.tokens.size(); ++i) {
        const std::string& tok = statement.tokens[i];
        bool alpha = !tok.empty() &&
                     std::all_of(tok.begin(), tok.end(), [](char c) { return c >= 'a' && c <= 'z'; });
        if (alpha && !stoplist.count(tok) && store.contains(tok)) indices.push_back(i);
    }
    return indices;
}

std::vector<StatementGroup> load_dataset(const std::string& path, DatasetFormat format,
                                         std::size_t max_tokens) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);

    std::vector<StatementGroup> groups;
    std::unordered_map<std::string, std::size_t> group_index;
    std::unordered_set<std::string> seen_ids;

    auto push_statement = [&](Statement&& s) {
        if (!seen_ids.insert(s.id).second) {
            throw std::runtime_error("duplicate statement id '" + s.id + "'");
        }
        check_tag_alignment(s);
        auto [it, fresh] = group_index.try_emplace(s.group_id, groups.size());
        if (fresh) groups.push_back({s.group_id, {}});
        groups[it->second].statements.push_back(std::move(s));
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec = parse_line(line, line_no);
        if (rec.contains("_meta")) continue;

        if (format == DatasetFormat::statements) {
            Statement s;
            s.id = require_field(rec, "id", line_no).get<std::string>();
            s.text = require_field(rec, "text", line_no).get<std::string>();
            s.label = require_field(rec, "label", line_no).get<bool>();
            s.group_id = require_field(rec, "group", line_no).get<std::string>();
            if (rec.contains("tags")) s.pos_tags = tag_list(rec["tags"], s.id);
            if (rec.contains("origin")) {
                s.origin = origin_from_name(rec["origin"].get<std::string>());
            }
            try {
                auto tok = tokenize(s.text, max_tokens);
                s.tokens = std::move(tok.tokens);
                s.truncated = tok.truncated;
            } catch (const std::invalid_argument&) {
                throw std::runtime_error("record '" + s.id + "': empty text");
            }
            push_statement(std::move(s));
        } else {
            const std::string id = require_field(rec, "id", line_no).get<std::string>();
            const std::string question = require_field(rec, "question", line_no).get<std::string>();
            const json& choices = require_field(rec, "choices", line_no);
            const long long answer = require_field(rec, "answer_idx", line_no).get<long long>();
            if (!choices.is_array() || choices.empty()) {
                throw std::runtime_error("record '" + id + "': choices must be a nonempty array");
            }
            if (answer < 0 || static_cast<std::size_t>(answer) >= choices.size()) {
                throw std::runtime_error("record '" + id + "': answer_idx " +
                                         std::to_string(answer) + " out of range for " +
                                         std::to_string(choices.size()) + " choices");
            }
            const json* tags = rec.contains("tags") ? &rec["tags"] : nullptr;
            if (tags && (!tags->is_array() || tags->size() != choices.size())) {
                throw std::runtime_error("record '" + id + "': tags must align with choices");
            }
            for (std::size_t k = 0; k < choices.size(); ++k) {
                Statement s;
                s.id = id + "#" + std::to_string(k);
                s.text = question + " " + choices[k].get<std::string>();
                s.label = static_cast<std::size_t>(answer) == k;
                s.group_id = id;
                if (tags) s.pos_tags = tag_list((*tags)[k], s.id);
                try {
                    auto tok = tokenize(s.text, max_tokens);
                    s.tokens = std::move(tok.tokens);
                    s.truncated = tok.truncated;
                } catch (const std::invalid_argument&) {
                    throw std::runtime_error("record '" + id + "': empty statement text");
                }
                push_statement(std::move(s));
            }
        }
    }
    if (groups.empty()) throw std::runtime_error("dataset has no records: " + path);
    return groups;
}

std::string statement_record(const Statement& s) {
    json rec;
    rec["id"] = s.id;
    rec["text"] = s.text;
    rec["label"] = s.label;
    rec["group"] = s.group_id;
    if (!s.pos_tags.empty()) rec["tags"] = s.pos_tags;
    if (s.origin != Origin::golden) rec["origin"] = std::string(origin_name(s.origin));
    return rec.dump();
}

void save_groups(const std::string& path, const std::vector<StatementGroup>& groups,
                 const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset: " + path);
    if (!config_hash.empty()) {
        json meta;
        meta["_meta"] = {{"config_hash", config_hash}, {"format", "statements"}};
        out << meta.dump() << "\n";
    }
    for (const auto& g : groups) {
        for (const auto& s : g.statements) out << statement_record(s) << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace ccsg
