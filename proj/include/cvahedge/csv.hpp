#pragma once

#include <charconv>
#include <ostream>
#include <string>
#include <vector>

namespace cvahedge {

// shortest decimal that parses back to the same double
inline std::string fmt(double v)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

class CsvWriter {
public:
    CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out)
    {
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }
    CsvWriter& operator<<(double v) { return cell(fmt(v)); }
    CsvWriter& operator<<(const std::string& s) { return cell(s); }
    CsvWriter& operator<<(std::size_t v) { return cell(std::to_string(v)); }
    void end_row()
    {
        out_ << '\n';
        first_ = true;
    }

private:
    CsvWriter& cell(const std::string& s)
    {
        out_ << (first_ ? "" : ",") << s;
        first_ = false;
        return *this;
    }
    std::ostream& out_;
    bool first_ = true;
};

}  // namespace cvahedge
