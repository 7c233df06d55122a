#pragma once

#include <string>
#include <vector>

namespace calm::text {

/// Lowercase and split on runs of non-alphanumeric characters. This is the
/// single tokenizer used for indexing, retrieval queries and ROUGE, so that
/// oracle computations can reproduce scores exactly.
std::vector<std::string> tokenize(const std::string& s);

/// Remove citation markers of the form [n] (n = digits).
std::string strip_citation_markers(const std::string& s);

/// Normalization for exact/substring answer matching: lowercase, collapse
/// whitespace, strip punctuation at token edges.
std::string normalize_for_match(const std::string& s);

/// Collapse whitespace runs to single spaces and trim both ends.
std::string collapse_ws(const std::string& s);

std::string to_lower(std::string s);

bool contains_normalized(const std::string& haystack, const std::string& needle);

std::string replace_all(std::string s, const std::string& from, const std::string& to);

}  // namespace calm::text
