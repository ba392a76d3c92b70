#include "medrec/prompts.hpp"

#include <fstream>
#include <sstream>

#include "medrec/error.hpp"

namespace medrec {

std::string render_template(const std::string& tpl,
                            const std::map<std::string, std::string>& values) {
    std::string out = tpl;
    for (const auto& [key, value] : values) {
        const std::string token = "{{" + key + "}}";
        std::size_t pos = 0;
        while ((pos = out.find(token, pos)) != std::string::npos) {
            out.replace(pos, token.size(), value);
            pos += value.size();
        }
    }
    return out;
}

const std::string& recommendation_schema_text() {
    static const std::string schema =
        R"({"entries": [{"name": "...", "dosage": "...", "route": "...", "frequency": "...", "timing": "...", "indication": "..."}], "rationale": "..."})";
    return schema;
}

const std::string& review_schema_text() {
    static const std::string schema = R"({"grade": 0.0, "critique": "..."})";
    return schema;
}

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.generation_system =
        "You are a clinical decision-support assistant. Given a clinical note, "
        "recommend the patient's medications.\n"
        "Respond with a single JSON object and nothing else, using exactly this "
        "schema:\n{{schema}}\n"
        "Every entry must include all six fields; use an empty string for timing "
        "when no qualifier applies.\n";
    t.generation_user =
        "{{vignette}}\n\n"
        "Recommend the complete medication list for this patient as JSON.\n";
    t.review_system =
        "You are reviewing an anonymized medication recommendation produced for a "
        "clinical note. Judge its accuracy, relevance, and completeness.\n"
        "Respond with a single JSON object and nothing else, using exactly this "
        "schema:\n{{schema}}\n"
        "The grade must be a number between 0.0 and 1.0.\n";
    t.review_user =
        "{{response}}\n\n"
        "The recommendation above was proposed for this clinical note:\n"
        "{{vignette}}\n\n"
        "Grade the recommendation.\n";
    return t;
}

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::io_error, "cannot open prompt template '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace

PromptTemplates PromptTemplates::load_dir(const std::string& dir) {
    PromptTemplates t;
    t.generation_system = read_file(dir + "/generation_system.txt");
    t.generation_user = read_file(dir + "/generation_user.txt");
    t.review_system = read_file(dir + "/review_system.txt");
    t.review_user = read_file(dir + "/review_user.txt");
    return t;
}

} // namespace medrec
