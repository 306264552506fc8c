#ifndef GMORPH_CONFIG_HPP
#define GMORPH_CONFIG_HPP

#include <map>
#include <optional>
#include <string>

namespace gmorph {

// Plain key=value configuration. Lines starting with '#' and blank lines
// are ignored; whitespace around keys and values is trimmed.
class KeyValueConfig {
  public:
    KeyValueConfig() = default;

    static KeyValueConfig from_file(const std::string& path);
    static KeyValueConfig from_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::optional<std::string> get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_long(const std::string& key, long fallback) const;

    void set(const std::string& key, const std::string& value) {
        values_[key] = value;
    }
    const std::map<std::string, std::string>& values() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace gmorph

#endif  // GMORPH_CONFIG_HPP
