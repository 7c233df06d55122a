#include "calm/prompts.hpp"

#include <fstream>
#include <sstream>

#include "calm/errors.hpp"
#include "calm/text.hpp"

namespace calm {
namespace {

const char* kAsqaGenerateInstruction =
    "Instruction: Write an accurate, engaging, and concise answer for the given question "
    "using only the provided search results (some of which might be irrelevant) and cite "
    "them properly. Use an unbiased and journalistic tone. Always cite for factual claims. "
    "When citing several search results, use [1][2][3]. Cite at least one and no more than "
    "three documents per sentence. If multiple documents support the sentence, only cite a "
    "minimum sufficient subset.";

const char* kEli5GenerateInstruction =
    "Instruction: Write an accurate, engaging, and concise answer for the given question "
    "using only the provided search results (some of which might be irrelevant) and cite "
    "them properly. Use an unbiased and journalistic tone. Always cite for any factual "
    "claim. When citing several search results, use [1][2][3]. Cite at least one document "
    "and at most three documents in each sentence. If multiple documents support the "
    "sentence, only cite a minimum sufficient subset of the documents.";

const char* kQampariGenerateInstruction =
    "Instruction: Provide a list of accurate answers for the given question using only the "
    "provided search results (some of which might be irrelevant) and cite them properly "
    "using [1][2][3]. Always cite one and only one document for each answer. Separate "
    "answers by commas. For questions that have more than 5 answers, write at least 5 "
    "answers.";

const char* kAsqaCorrectInstruction =
    "Instruction: Provide a concise response to the question by analyzing relevant search "
    "results (some of which might be irrelevant), and cite useful resources using [1][2][3] "
    "format. Use an unbiased and journalistic tone, ensuring facts are presented clearly "
    "based on the search documents. Cite at least one and no more than three documents per "
    "sentence. Additionally, you will be provided with an incomplete draft solution, which "
    "is based on the first {VERIFIED_COUNT} search results and might contain citation "
    "inaccuracies. Therefore, it might not capture all conceivable responses to the "
    "question. Your role is to assess the draft's comprehensiveness as well as its "
    "correctness, and then update the solution to encapsulate all possible answers "
    "according to the search documents. Provide your answer after \"Corrected Answer:\", "
    "and ensure each sentence is supported by citations from one to three sources.";

const char* kEli5CorrectInstruction =
    "Instruction: Provide a succint response to the question by analyzing relevant search "
    "results (some of which might be irrelevant), and cite these using [1][2][3] format. "
    "Limit citations to one to three per sentence, and only cite a necessary subset if "
    "multiple sources corroborate a point. Additionally, you will be provided with an "
    "incomplete draft solution, which is based on the first {VERIFIED_COUNT} search results "
    "and might contain citation inaccuracies. Therefore, it might not capture all "
    "conceivable responses to the question. Your role is to assess the draft's "
    "comprehensiveness as well as its correctness of citations, and then update the "
    "solution to encapsulate all possible answers according to the search documents. "
    "Provide your answer after \"Corrected Answer:\", and ensure each sentence is supported "
    "by citations from one to three sources.";

const char* kQampariCorrectInstruction =
    "Instruction: Provide a list of accurate answers for the given question using only the "
    "provided search results (some of which might be irrelevant) and cite them properly "
    "using [1][2][3]. Always cite one and only one document for each answer. Separate "
    "answers by commas. For questions that have more than 5 answers, write at least 5 "
    "answers. Additionally, you will receive an incorrect draft or incomplete draft "
    "solution, which is based on the first {VERIFIED_COUNT} search results. Hence, it may "
    "not encompass all potential answers. Your task is to check this solution and modify it "
    "to comprehensively answer the question, using information from the additional provided "
    "search results. If the draft is missing, start from scratch, basing your answer on the "
    "search outcomes. Please begin by concisely explain your evaluation of the draft "
    "solution within 150 words. Then, present your conclusive response under the heading "
    "\"Final Answer:\"";

// Shots are user-editable data; the built-in ones are deliberately small
// question/answer pairs that show the citation format without document lines.
std::string long_form_shots() {
    return "Example question: Who invented the practical telephone?\n"
           "Example answer: Alexander Graham Bell was awarded the first patent for the "
           "telephone in 1876 [2]. Elisha Gray filed a competing claim the same year [4].\n"
           "\n"
           "Example question: Which ocean borders the most countries?\n"
           "Example answer: The Atlantic Ocean borders the largest number of countries, "
           "spanning coastlines on four continents [1].\n";
}

std::string entity_list_shots() {
    return "Example question: Which planets have rings?\n"
           "Example answer: Saturn [1], Jupiter [3], Uranus [2], Neptune [2].\n"
           "\n"
           "Example question: Which elements are noble gases?\n"
           "Example answer: Helium [4], Neon [4], Argon [1], Krypton [2], Xenon [2].\n";
}

std::string long_form_correct_shot() {
    return "Example question: Who invented the practical telephone?\n"
           "Example drafted solution: Alexander Graham Bell patented the telephone [2].\n"
           "Example corrected answer: Alexander Graham Bell was awarded the first patent "
           "for the telephone in 1876 [2]. Elisha Gray filed a competing claim the same "
           "year [4].\n";
}

std::string entity_list_correct_shot() {
    return "Example question: Which planets have rings?\n"
           "Example drafted solution: Saturn [1].\n"
           "Example corrected answer: The draft names only the most famous ringed planet; "
           "the documents list three more. Final Answer: Saturn [1], Jupiter [3], "
           "Uranus [2], Neptune [2].\n";
}

std::string generate_skeleton(const std::string& instruction, const std::string& shots) {
    return instruction + "\n\n" + shots + "\nQuestion: {QUESTION}\n\n{DOCUMENTS}\n\nAnswer:";
}

std::string correct_skeleton(const std::string& instruction, const std::string& shot) {
    return instruction + "\n\n" + shot +
           "\nQuestion: {QUESTION}\n\n{DOCUMENTS}\n\n"
           "Drafted Solution: {DRAFT}\n\nCorrected Answer:";
}

std::string substitute_common(const PromptTemplate& tmpl, const std::string& query,
                              const std::vector<std::pair<int, Passage>>& docs) {
    if (docs.empty()) throw IntegrityError("prompt rendering requires at least one document");
    for (size_t i = 1; i < docs.size(); ++i) {
        if (docs[i].first <= docs[i - 1].first) {
            throw IntegrityError("display indices must be strictly increasing");
        }
    }
    auto prompt = text::replace_all(tmpl.text, "{QUESTION}", query);
    return text::replace_all(prompt, "{DOCUMENTS}", document_block(docs));
}

}  // namespace

AnswerStyle answer_style_of(TaskStyle task) {
    return task == TaskStyle::qampari_entity_list ? AnswerStyle::entity_list
                                                  : AnswerStyle::long_form;
}

TaskStyle task_style_from_string(const std::string& s) {
    if (s == "asqa_long_form" || s == "asqa") return TaskStyle::asqa_long_form;
    if (s == "qampari_entity_list" || s == "qampari") return TaskStyle::qampari_entity_list;
    if (s == "eli5_long_form" || s == "eli5") return TaskStyle::eli5_long_form;
    throw ConfigError("unknown task style: " + s);
}

std::string to_string(TaskStyle task) {
    switch (task) {
        case TaskStyle::asqa_long_form: return "asqa_long_form";
        case TaskStyle::qampari_entity_list: return "qampari_entity_list";
        case TaskStyle::eli5_long_form: return "eli5_long_form";
    }
    return "asqa_long_form";
}

PromptTemplate default_template(TaskStyle task, PromptMode mode) {
    PromptTemplate tmpl;
    tmpl.task_style = task;
    tmpl.mode = mode;
    switch (task) {
        case TaskStyle::asqa_long_form:
            tmpl.text = mode == PromptMode::generate
                            ? generate_skeleton(kAsqaGenerateInstruction, long_form_shots())
                            : correct_skeleton(kAsqaCorrectInstruction, long_form_correct_shot());
            break;
        case TaskStyle::eli5_long_form:
            tmpl.text = mode == PromptMode::generate
                            ? generate_skeleton(kEli5GenerateInstruction, long_form_shots())
                            : correct_skeleton(kEli5CorrectInstruction, long_form_correct_shot());
            break;
        case TaskStyle::qampari_entity_list:
            tmpl.text = mode == PromptMode::generate
                            ? generate_skeleton(kQampariGenerateInstruction, entity_list_shots())
                            : correct_skeleton(kQampariCorrectInstruction,
                                               entity_list_correct_shot());
            break;
    }
    return tmpl;
}

PromptTemplate load_template(TaskStyle task, PromptMode mode, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open template file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    PromptTemplate tmpl;
    tmpl.task_style = task;
    tmpl.mode = mode;
    tmpl.text = buf.str();
    while (!tmpl.text.empty() && (tmpl.text.back() == '\n' || tmpl.text.back() == '\r')) {
        tmpl.text.pop_back();
    }
    return tmpl;
}

std::string document_block(const std::vector<std::pair<int, Passage>>& docs) {
    std::string block;
    for (const auto& [index, passage] : docs) {
        if (!block.empty()) block += "\n";
        block += "Document [" + std::to_string(index) + "](Title: " + passage.title +
                 "): " + passage.text;
    }
    return block;
}

std::string render_generation_prompt(const PromptTemplate& tmpl, const std::string& query,
                                     const std::vector<std::pair<int, Passage>>& docs) {
    return substitute_common(tmpl, query, docs);
}

std::string render_correction_prompt(const PromptTemplate& tmpl, const std::string& query,
                                     const std::vector<std::pair<int, Passage>>& docs,
                                     const GroundedAnswer& draft, size_t verified_count) {
    if (verified_count > docs.size()) {
        throw IntegrityError("verified_count exceeds the number of shown documents");
    }
    auto prompt = substitute_common(tmpl, query, docs);
    prompt = text::replace_all(prompt, "{DRAFT}", render(draft));
    return text::replace_all(prompt, "{VERIFIED_COUNT}", std::to_string(verified_count));
}

}  // namespace calm
