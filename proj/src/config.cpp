#include "phc/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace phc
{

namespace
{

std::string trim(const std::string& text)
{
    std::size_t first = 0;
    std::size_t last = text.size();
    while (first < last && std::isspace(static_cast<unsigned char>(text[first])))
    {
        ++first;
    }
    while (last > first && std::isspace(static_cast<unsigned char>(text[last - 1])))
    {
        --last;
    }
    return text.substr(first, last - first);
}

[[noreturn]] void fail_line(int line, const std::string& message)
{
    throw std::invalid_argument("config line " + std::to_string(line) + ": " + message);
}

bool valid_name(const std::string& name)
{
    if (name.empty())
    {
        return false;
    }
    for (char c : name)
    {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
        {
            return false;
        }
    }
    return true;
}

} // namespace

const std::string* ConfigSection::find(const std::string& key) const
{
    for (const ConfigEntry& entry : entries)
    {
        if (entry.key == key)
        {
            return &entry.value;
        }
    }
    return nullptr;
}

const ConfigSection* ConfigDoc::find(const std::string& name) const
{
    for (const ConfigSection& section : sections)
    {
        if (section.name == name)
        {
            return &section;
        }
    }
    return nullptr;
}

const std::string* ConfigDoc::find_value(const std::string& section, const std::string& key) const
{
    const ConfigSection* found = find(section);
    return found != nullptr ? found->find(key) : nullptr;
}

void ConfigDoc::set(const std::string& section, const std::string& key, const std::string& value)
{
    for (ConfigSection& candidate : sections)
    {
        if (candidate.name != section)
        {
            continue;
        }
        for (ConfigEntry& entry : candidate.entries)
        {
            if (entry.key == key)
            {
                entry.value = value;
                return;
            }
        }
        candidate.entries.push_back(ConfigEntry { key, value, 0 });
        return;
    }
    ConfigSection fresh;
    fresh.name = section;
    fresh.entries.push_back(ConfigEntry { key, value, 0 });
    sections.push_back(std::move(fresh));
}

bool operator==(const ConfigDoc& a, const ConfigDoc& b)
{
    if (a.sections.size() != b.sections.size())
    {
        return false;
    }
    for (std::size_t s = 0; s < a.sections.size(); ++s)
    {
        const ConfigSection& sa = a.sections[s];
        const ConfigSection& sb = b.sections[s];
        if (sa.name != sb.name || sa.entries.size() != sb.entries.size())
        {
            return false;
        }
        for (std::size_t e = 0; e < sa.entries.size(); ++e)
        {
            if (sa.entries[e].key != sb.entries[e].key ||
                sa.entries[e].value != sb.entries[e].value)
            {
                return false;
            }
        }
    }
    return true;
}

bool operator!=(const ConfigDoc& a, const ConfigDoc& b)
{
    return !(a == b);
}

ConfigDoc parse_config(const std::string& text)
{
    ConfigDoc doc;
    ConfigSection* current = nullptr;
    std::istringstream stream(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(stream, raw))
    {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line.front() == '#')
        {
            continue;
        }
        if (line.front() == '[')
        {
            if (line.back() != ']')
            {
                fail_line(line_no, "unterminated section header");
            }
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (!valid_name(name))
            {
                fail_line(line_no, "invalid section name '" + name + "'");
            }
            if (doc.find(name) != nullptr)
            {
                fail_line(line_no, "duplicate section [" + name + "]");
            }
            doc.sections.push_back(ConfigSection { name, {}, line_no });
            current = &doc.sections.back();
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
        {
            fail_line(line_no, "expected 'key = value' or '[section]'");
        }
        if (current == nullptr)
        {
            fail_line(line_no, "entry before any [section] header");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!valid_name(key))
        {
            fail_line(line_no, "invalid key '" + key + "'");
        }
        if (current->find(key) != nullptr)
        {
            fail_line(line_no, "duplicate key '" + key + "' in [" + current->name + "]");
        }
        current->entries.push_back(ConfigEntry { key, value, line_no });
    }
    return doc;
}

std::string serialize_config(const ConfigDoc& doc)
{
    std::string out;
    for (std::size_t s = 0; s < doc.sections.size(); ++s)
    {
        if (s != 0)
        {
            out += '\n';
        }
        out += '[' + doc.sections[s].name + "]\n";
        for (const ConfigEntry& entry : doc.sections[s].entries)
        {
            out += entry.key + " = " + entry.value + '\n';
        }
    }
    return out;
}

ConfigDoc load_config_file(const std::string& path)
{
    std::ifstream stream(path, std::ios::binary);
    if (!stream)
    {
        throw std::invalid_argument("cannot open config file: " + path);
    }
    std::ostringstream text;
    text << stream.rdbuf();
    try
    {
        return parse_config(text.str());
    }
    catch (const std::invalid_argument& e)
    {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void apply_override(ConfigDoc& doc, const std::string& assignment)
{
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
    {
        throw std::invalid_argument("override '" + assignment + "' is not section.key=value");
    }
    const std::string target = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    const std::size_t dot = target.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == target.size())
    {
        throw std::invalid_argument("override '" + assignment + "' is not section.key=value");
    }
    doc.set(target.substr(0, dot), target.substr(dot + 1), value);
}

ConfigReader::ConfigReader(const ConfigDoc& doc, std::string section)
    : section_(doc.find(section)), name_(std::move(section))
{
}

bool ConfigReader::has(const std::string& key) const
{
    return section_ != nullptr && section_->find(key) != nullptr;
}

std::string ConfigReader::tag(const std::string& key) const
{
    return "config [" + name_ + "]." + key;
}

std::string ConfigReader::text(const std::string& key, const std::string& fallback) const
{
    consumed_.push_back(key);
    if (section_ == nullptr)
    {
        return fallback;
    }
    const std::string* value = section_->find(key);
    return value != nullptr ? *value : fallback;
}

std::string ConfigReader::require_text(const std::string& key) const
{
    consumed_.push_back(key);
    const std::string* value = section_ != nullptr ? section_->find(key) : nullptr;
    if (value == nullptr || value->empty())
    {
        throw std::invalid_argument(tag(key) + " is required");
    }
    return *value;
}

double ConfigReader::number(const std::string& key, double fallback) const
{
    consumed_.push_back(key);
    const std::string* value = section_ != nullptr ? section_->find(key) : nullptr;
    if (value == nullptr)
    {
        return fallback;
    }
    double parsed = 0.0;
    const char* begin = value->data();
    const char* end = begin + value->size();
    const auto [ptr, ec] = std::from_chars(begin, end, parsed);
    if (ec != std::errc() || ptr != end)
    {
        throw std::invalid_argument(tag(key) + ": not a number: '" + *value + "'");
    }
    return parsed;
}

double ConfigReader::require_number(const std::string& key) const
{
    if (!has(key))
    {
        consumed_.push_back(key);
        throw std::invalid_argument(tag(key) + " is required");
    }
    return number(key, 0.0);
}

long ConfigReader::integer(const std::string& key, long fallback) const
{
    consumed_.push_back(key);
    const std::string* value = section_ != nullptr ? section_->find(key) : nullptr;
    if (value == nullptr)
    {
        return fallback;
    }
    long parsed = 0;
    const char* begin = value->data();
    const char* end = begin + value->size();
    const auto [ptr, ec] = std::from_chars(begin, end, parsed);
    if (ec != std::errc() || ptr != end)
    {
        throw std::invalid_argument(tag(key) + ": not an integer: '" + *value + "'");
    }
    return parsed;
}

bool ConfigReader::flag(const std::string& key, bool fallback) const
{
    consumed_.push_back(key);
    const std::string* value = section_ != nullptr ? section_->find(key) : nullptr;
    if (value == nullptr)
    {
        return fallback;
    }
    if (*value == "true" || *value == "1" || *value == "yes" || *value == "on")
    {
        return true;
    }
    if (*value == "false" || *value == "0" || *value == "no" || *value == "off")
    {
        return false;
    }
    throw std::invalid_argument(tag(key) + ": not a boolean: '" + *value + "'");
}

std::uint64_t ConfigReader::seed(const std::string& key, std::uint64_t fallback) const
{
    consumed_.push_back(key);
    const std::string* value = section_ != nullptr ? section_->find(key) : nullptr;
    if (value == nullptr)
    {
        return fallback;
    }
    std::uint64_t parsed = 0;
    const char* begin = value->data();
    const char* end = begin + value->size();
    const auto [ptr, ec] = std::from_chars(begin, end, parsed);
    if (ec != std::errc() || ptr != end)
    {
        throw std::invalid_argument(tag(key) + ": not an unsigned integer: '" + *value + "'");
    }
    return parsed;
}

void ConfigReader::reject_unknown_keys() const
{
    if (section_ == nullptr)
    {
        return;
    }
    for (const ConfigEntry& entry : section_->entries)
    {
        if (std::find(consumed_.begin(), consumed_.end(), entry.key) == consumed_.end())
        {
            throw std::invalid_argument("config [" + name_ + "]." + entry.key +
                                        " is not a recognised setting (line " +
                                        std::to_string(entry.line) + ")");
        }
    }
}

} // namespace phc
