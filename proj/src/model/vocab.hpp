#pragma once

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace detours::model {

// Whitespace/punctuation word tokenizer with a dense id space. Reserved
// ids are stable across save/load; everything else is assigned in
// lexicographic order of the training text vocabulary.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kSepSrc = 2;
    static constexpr int kSepQry = 3;
    static constexpr int kSepCand = 4;
    static constexpr int kCls = 5;
    static constexpr int kReserved = 6;

    static std::vector<std::string> split_words(const std::string& text);
    static Vocab build(const std::vector<std::string>& texts);

    std::vector<int> tokenize(const std::string& text) const;
    int size() const { return kReserved + static_cast<int>(token_to_id_.size()); }

    nlohmann::json to_json() const;
    static Vocab from_json(const nlohmann::json& j);

private:
    std::map<std::string, int> token_to_id_;
};

} // namespace detours::model
