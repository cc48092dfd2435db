// Tokenization, noun extraction and dataset ingestion into statement
// groups.
#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ccsg/embedding_store.hpp"

namespace ccsg {

inline constexpr std::size_t kDefaultMaxTokens = 128;

enum class Origin { golden, cf_pos, cf_neg };

std::string_view origin_name(Origin o);
Origin origin_from_name(std::string_view name);

struct Statement {
    std::string id;
    std::string text;
    std::vector<std::string> tokens;   // lowercased, length <= L
    bool label = false;                // true = plausible
    std::string group_id;
    Origin origin = Origin::golden;
    std::vector<std::string> pos_tags; // empty or aligned to tokens
    bool truncated = false;
};

struct StatementGroup {
    std::string group_id;
    std::vector<Statement> statements;
};

struct TokenizeResult {
    std::vector<std::string> tokens;
    bool truncated = false;
};

// Lowercases, splits on whitespace, and peels leading/trailing ASCII
// punctuation into separate tokens. Output longer than max_tokens is cut
// and flagged. Throws std::invalid_argument if nothing remains.
TokenizeResult tokenize(std::string_view text, std::size_t max_tokens = kDefaultMaxTokens);

// ~150 English function words; mirrors data/stopwords.txt.
const std::set<std::string>& default_stoplist();
std::set<std::string> load_stoplist(const std::string& path);

bool is_noun_tag(std::string_view tag);

// Indices of noun tokens. Uses pos_tags when present; otherwise falls
// back to alphabetic tokens that are in the store and not stoplisted.
std::vector<std::size_t> extract_nouns(const Statement& statement, const EmbeddingStore& store,
                                       const std::set<std::string>& stoplist = default_stoplist());

enum class DatasetFormat { statements, multichoice };

// Newline-delimited JSON records. `statements` records: {id, text,
// label, group} with optional tags / origin. `multichoice` records:
// {id, question, choices, answer_idx} with optional tags (one tag list
// per choice); each expands to one group, text "<question> <choice>",
// label true only at answer_idx.
std::vector<StatementGroup> load_dataset(const std::string& path, DatasetFormat format,
                                         std::size_t max_tokens = kDefaultMaxTokens);

// Writes groups in the `statements` record layout (plus a leading _meta
// line when config_hash is nonempty). load_dataset() reads it back
// identically.
void save_groups(const std::string& path, const std::vector<StatementGroup>& groups,
                 const std::string& config_hash = "");

std::string statement_record(const Statement& s);

}  // namespace ccsg
