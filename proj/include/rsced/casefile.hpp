#pragma once

#include "rsced/model.hpp"

#include <stdexcept>
#include <string>

namespace rsced {

constexpr int kCaseFormatVersion = 1;

// Malformed document: bad JSON, wrong type, missing or unknown field. The
// location is a JSON path such as $.units[1].pmax_mw.
class CaseFileError : public std::runtime_error {
public:
    CaseFileError(const std::string& where, const std::string& what)
        : std::runtime_error(where + ": " + what), where_(where)
    {
    }
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

MarketCase parseCase(const std::string& text);
// Canonical form: fixed key order, two-space indent, trailing newline.
std::string serializeCase(const MarketCase& c);

MarketCase loadCase(const std::string& path);
void saveCase(const MarketCase& c, const std::string& path);

std::string readFile(const std::string& path);
void writeFile(const std::string& path, const std::string& text);

}  // namespace rsced
