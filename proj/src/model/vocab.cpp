#include "model/vocab.hpp"

#include "core/errors.hpp"

#include <cctype>
#include <set>

namespace detours::model {

using nlohmann::json;

std::vector<std::string> Vocab::split_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text + " ") {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    return out;
}

Vocab Vocab::build(const std::vector<std::string>& texts) {
    std::set<std::string> words;
    for (const auto& t : texts)
        for (auto& w : split_words(t)) words.insert(std::move(w));
    Vocab v;
    int next = kReserved;
    for (const auto& w : words) v.token_to_id_[w] = next++;
    return v;
}

std::vector<int> Vocab::tokenize(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& w : split_words(text)) {
        const auto it = token_to_id_.find(w);
        ids.push_back(it == token_to_id_.end() ? kUnk : it->second);
    }
    return ids;
}

json Vocab::to_json() const {
    json tokens = json::object();
    for (const auto& [w, id] : token_to_id_) tokens[w] = id;
    return json{{"reserved", kReserved}, {"tokens", tokens}};
}

Vocab Vocab::from_json(const json& j) {
    if (j.value("reserved", -1) != kReserved)
        throw FormatError("vocab reserved-id layout mismatch");
    Vocab v;
    for (const auto& [w, id] : j.at("tokens").items()) v.token_to_id_[w] = id.get<int>();
    return v;
}

} // namespace detours::model
