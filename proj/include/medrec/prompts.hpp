#pragma once

#include <map>
#include <string>

namespace medrec {

/// Replaces every {{key}} placeholder; unknown placeholders are left as-is.
std::string render_template(const std::string& tpl,
                            const std::map<std::string, std::string>& values);

/// JSON-schema instructions injected into system prompts ({{schema}}).
const std::string& recommendation_schema_text();
const std::string& review_schema_text();

/// The four prompt templates used by the pipeline. Placeholders:
/// {{schema}} in system prompts, {{vignette}} and {{response}} in user
/// prompts. The user templates lead with the variable content so script
/// fingerprints (first 64 prompt characters) distinguish notes and
/// responses.
struct PromptTemplates {
    std::string generation_system;
    std::string generation_user;
    std::string review_system;
    std::string review_user;

    static PromptTemplates defaults();

    /// Loads generation_system.txt / generation_user.txt / review_system.txt
    /// / review_user.txt from a directory.
    static PromptTemplates load_dir(const std::string& dir);
};

} // namespace medrec
