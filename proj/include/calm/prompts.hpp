#pragma once

#include <string>
#include <utility>
#include <vector>

#include "calm/answer.hpp"
#include "calm/corpus.hpp"

namespace calm {

enum class TaskStyle { asqa_long_form, qampari_entity_list, eli5_long_form };

enum class PromptMode { generate, correct };

AnswerStyle answer_style_of(TaskStyle task);
TaskStyle task_style_from_string(const std::string& s);
std::string to_string(TaskStyle task);

/// A plain-text prompt skeleton with {QUESTION}, {DOCUMENTS}, {DRAFT} and
/// {VERIFIED_COUNT} placeholders. Instructions and in-context shots are part
/// of the text and ship as editable files.
struct PromptTemplate {
    TaskStyle task_style = TaskStyle::asqa_long_form;
    PromptMode mode = PromptMode::generate;
    std::string text;
};

/// Built-in defaults (two shots for generation, one for correction).
PromptTemplate default_template(TaskStyle task, PromptMode mode);

PromptTemplate load_template(TaskStyle task, PromptMode mode, const std::string& path);

/// One "Document [i](Title: t): text" line per shown document.
std::string document_block(const std::vector<std::pair<int, Passage>>& docs);

/// Instruction + shots + question + document lines + trailing answer cue.
/// Requires non-empty docs with strictly increasing display indices.
std::string render_generation_prompt(const PromptTemplate& tmpl, const std::string& query,
                                     const std::vector<std::pair<int, Passage>>& docs);

/// Correction prompt carrying the drafted (intersected) answer and the
/// number of already-verified documents.
std::string render_correction_prompt(const PromptTemplate& tmpl, const std::string& query,
                                     const std::vector<std::pair<int, Passage>>& docs,
                                     const GroundedAnswer& draft, size_t verified_count);

}  // namespace calm
