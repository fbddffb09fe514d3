#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace grasp {

// Flat `key = value` settings. Every key has a documented default; sources
// apply in order defaults < GRASP_SEED < config file < command-line flags.
class RunConfig {
 public:
  struct Key {
    const char* name;
    const char* default_value;
    const char* help;
  };

  static const std::vector<Key>& schema();
  static bool known(const std::string& key);

  RunConfig();

  // GRASP_SEED supplies the seed when neither file nor flag sets one.
  void apply_environment();
  // Throws UsageError on unknown keys or malformed lines.
  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  // Semicolon-separated list; empty string gives an empty list.
  std::vector<std::string> get_list(const std::string& key) const;

  // All keys in schema order, one `key = value` per line.
  std::string resolved_text() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace grasp
