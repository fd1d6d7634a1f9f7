#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "ebsp/alphabet.hpp"
#include "ebsp/composition.hpp"
#include "ebsp/error.hpp"
#include "ebsp/types.hpp"

namespace ebsp {

/// Knobs shared by all CLI subcommands.
struct RunConfig {
    OracleLimits limits;
    /// Largest universe for crux and cover searches.
    std::size_t enumeration_budget = 6;
    std::filesystem::path cache_dir;
    std::uint64_t seed = 1;
    int jobs = 1;

    void validate() const {
        if (limits.fo_max_size == 0 || limits.mso_max_size == 0 || limits.mso_max_rank < 0 || enumeration_budget == 0)
            throw DomainError("config: caps must be positive");
        if (enumeration_budget > 20) throw DomainError("config: enumeration_budget above 20");
        if (jobs < 1) throw DomainError("config: jobs must be at least 1");
    }

    /// key=value lines, in a fixed order.
    std::string to_text() const {
        std::string s;
        s += "fo_max_size=" + std::to_string(limits.fo_max_size) + "\n";
        s += "mso_max_size=" + std::to_string(limits.mso_max_size) + "\n";
        s += "mso_max_rank=" + std::to_string(limits.mso_max_rank) + "\n";
        s += "enumeration_budget=" + std::to_string(enumeration_budget) + "\n";
        s += "cache_dir=" + cache_dir.string() + "\n";
        s += "seed=" + std::to_string(seed) + "\n";
        s += "jobs=" + std::to_string(jobs) + "\n";
        return s;
    }
};

/// Reads `key = value` lines ('#' starts a comment) over `base`.
inline RunConfig parse_config(std::string_view text, RunConfig base = {}) {
    std::size_t lineNo = 0, pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = detail::strip_comment(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++lineNo;
        auto eq = line.find('=');
        auto words = detail::split_words(line);
        if (!words.empty()) {
            if (eq == std::string_view::npos) throw ParseError("expected key = value", lineNo);
            auto key = detail::split_words(line.substr(0, eq));
            auto val = detail::split_words(line.substr(eq + 1));
            if (key.size() != 1 || val.size() > 1) throw ParseError("expected key = value", lineNo);
            const std::string v = val.empty() ? "" : val[0];
            auto num = [&](const char* what) {
                auto x = detail::parse_int(v, lineNo, what);
                if (x < 0) throw ParseError(std::string(what) + " must be non-negative", lineNo);
                return static_cast<std::uint64_t>(x);
            };
            const auto& k = key[0];
            if (k == "fo_max_size")
                base.limits.fo_max_size = num("fo_max_size");
            else if (k == "mso_max_size")
                base.limits.mso_max_size = num("mso_max_size");
            else if (k == "mso_max_rank")
                base.limits.mso_max_rank = static_cast<int>(num("mso_max_rank"));
            else if (k == "enumeration_budget")
                base.enumeration_budget = num("enumeration_budget");
            else if (k == "cache_dir")
                base.cache_dir = v;
            else if (k == "seed")
                base.seed = num("seed");
            else if (k == "jobs")
                base.jobs = static_cast<int>(num("jobs"));
            else
                throw ParseError("unknown config key '" + k + "'", lineNo);
        }
        if (nl == text.size()) break;
    }
    base.validate();
    return base;
}

inline RunConfig load_config(const std::filesystem::path& file, RunConfig base = {}) {
    return parse_config(detail::read_file(file), std::move(base));
}

}  // namespace ebsp
