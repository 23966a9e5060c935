#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace phc
{

struct ConfigEntry
{
    std::string key;
    std::string value;
    int line = 0;
};

struct ConfigSection
{
    std::string name;
    std::vector<ConfigEntry> entries;
    int line = 0;

    const std::string* find(const std::string& key) const;
};

// ordered key = value document grouped into [section] blocks
struct ConfigDoc
{
    std::vector<ConfigSection> sections;

    const ConfigSection* find(const std::string& name) const;
    const std::string* find_value(const std::string& section, const std::string& key) const;
    void set(const std::string& section, const std::string& key, const std::string& value);
};

// equality over content only; source line numbers are ignored
bool operator==(const ConfigDoc& a, const ConfigDoc& b);
bool operator!=(const ConfigDoc& a, const ConfigDoc& b);

// parses '# comment' lines, '[section]' headers and 'key = value' entries;
// duplicate sections or duplicate keys inside a section are rejected with the
// offending line number
ConfigDoc parse_config(const std::string& text);

// canonical text form; parse(serialize(doc)) == doc
std::string serialize_config(const ConfigDoc& doc);

ConfigDoc load_config_file(const std::string& path);

// applies a 'section.key=value' override string to the document
void apply_override(ConfigDoc& doc, const std::string& assignment);

// typed access to one section with errors that name the offending field
class ConfigReader
{
public:
    ConfigReader(const ConfigDoc& doc, std::string section);

    bool section_exists() const { return section_ != nullptr; }
    bool has(const std::string& key) const;

    std::string text(const std::string& key, const std::string& fallback) const;
    std::string require_text(const std::string& key) const;
    double number(const std::string& key, double fallback) const;
    double require_number(const std::string& key) const;
    long integer(const std::string& key, long fallback) const;
    bool flag(const std::string& key, bool fallback) const;
    std::uint64_t seed(const std::string& key, std::uint64_t fallback) const;

    // rejects keys that were never read through this reader; call once all
    // expected keys have been consumed to surface typos
    void reject_unknown_keys() const;

private:
    std::string tag(const std::string& key) const;

    const ConfigSection* section_ = nullptr;
    std::string name_;
    mutable std::vector<std::string> consumed_;
};

} // namespace phc
