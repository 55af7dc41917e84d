#pragma once

#include <string>
#include <vector>

namespace nlh {

/// Named pass/fail outcome of a study check with a human-readable detail.
struct StudyVerdict {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline bool all_pass(const std::vector<StudyVerdict>& verdicts) {
    for (const auto& v : verdicts)
        if (!v.pass) return false;
    return true;
}

}  // namespace nlh
