#include "grasp/run_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "grasp/types.hpp"

namespace grasp {

const std::vector<RunConfig::Key>& RunConfig::schema() {
  static const std::vector<Key> keys = {
      {"seed", "0", "RNG seed for initialization, shuffling and dropout"},
      {"threads", "1", "worker threads (1 keeps runs bitwise reproducible)"},
      {"out", "", "output directory"},
      // graph
      {"use_semantic", "false", "add mutual cosine k-NN edges between patch tokens"},
      {"knn", "8", "neighbors per token for semantic edges"},
      {"connect_cls", "true", "link the CLS token to every patch token"},
      // model
      {"variant", "sage", "GNN backbone: gcn, gat or sage"},
      {"hidden", "256", "hidden width"},
      {"depth", "2", "message-passing layers"},
      {"heads", "4", "GAT attention heads"},
      {"dropout", "0.1", "dropout on hidden activations during training"},
      // training
      {"manifest", "", "dataset manifest (split, embedding, mask[, caption])"},
      {"lr", "0.001", "Adam learning rate"},
      {"epochs", "200", "maximum training epochs"},
      {"batch_size", "8", "samples per optimizer step"},
      {"val_fraction", "0", "train entries held out for validation when no val split exists"},
      {"patience", "30", "epochs without validation F-max gain before stopping"},
      // inference
      {"checkpoint", "", "model checkpoint(s); sal-eval accepts several separated by ';'"},
      {"emb", "", "embedding .npy (257 x 768)"},
      {"height", "256", "output map height"},
      {"width", "256", "output map width"},
      // evaluation
      {"split", "test", "manifest split evaluated by sal-eval"},
      {"pairs", "", "tab-separated prediction/ground-truth list"},
      {"feature", "", "two-way identification feature sets NAME:RECON.npy:GT.npy, ';'-separated"},
      {"distance", "", "correlation-distance feature sets NAME:RECON.npy:GT.npy, ';'-separated"},
      // composition
      {"fg", "", "foreground image (PPM/PGM)"},
      {"bg", "", "background image (PPM/PGM)"},
      {"saliency", "", "saliency map (PGM)"},
      {"theta", "0.5", "binarization threshold"},
      {"dilate", "0", "inpainting mask dilation radius"},
      {"candidates", "", "rank list: image, clip vector[, mask] per line"},
      {"text_vec", "", "reference text embedding .npy"},
      {"lambda_clip", "1", "weight of the semantic (cosine) score"},
      {"lambda_mask", "0.5", "weight of the structural (mask overlap) score"},
      {"consistency", "iou", "mask overlap measure: iou or dice"},
      // semantics
      {"lambda", "1000", "ridge regularization of the text projection"},
      {"projection", "", "text projection .npy (768 x d)"},
      {"vocab_terms", "", "vocabulary terms, one per line"},
      {"vocab_vectors", "", "vocabulary vectors .npy (|V| x d)"},
      {"k", "5", "number of textual cues"},
      // gradcheck
      {"seeds", "1", "number of consecutive seeds checked by gradcheck"},
  };
  return keys;
}

bool RunConfig::known(const std::string& key) {
  const auto& s = schema();
  return std::any_of(s.begin(), s.end(), [&](const Key& k) { return key == k.name; });
}

RunConfig::RunConfig() {
  for (const auto& k : schema()) values_[k.name] = k.default_value;
}

void RunConfig::apply_environment() {
  if (const char* seed = std::getenv("GRASP_SEED")) set("seed", seed);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    if (!known(key)) throw UsageError(path.string() + ":" + std::to_string(lineno) + ": unknown config key '" + key + "'");
    values_[key] = trim(t.substr(eq + 1));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw UsageError("unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("config key '" + key + "' expects an integer, got '" + v + "'");
  }
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("config key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> items;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::string RunConfig::resolved_text() const {
  std::string out;
  for (const auto& k : schema()) out += std::string(k.name) + " = " + values_.at(k.name) + "\n";
  return out;
}

}  // namespace grasp
