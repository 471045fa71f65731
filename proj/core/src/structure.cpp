#include "bbp/structure.hpp"

#include <algorithm>

#include <json.hpp>

namespace bbp {

void SeparableStructure::canonicalize() {
  for (auto& block : blocks) {
    for (auto& factor : block) std::sort(factor.begin(), factor.end());
    std::sort(block.begin(), block.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
  }
  std::sort(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) {
    return a.front().front() < b.front().front();
  });
}

bool SeparableStructure::same_partition(const SeparableStructure& other) const {
  if (dimension != other.dimension) return false;
  SeparableStructure a = *this;
  SeparableStructure b = other;
  a.canonicalize();
  b.canonicalize();
  return a.blocks == b.blocks;
}

void SeparableStructure::validate() const {
  if (dimension <= 0) throw Error(Errc::Internal, "structure has no dimension");
  std::vector<int> seen(static_cast<std::size_t>(dimension), 0);
  for (const auto& block : blocks) {
    if (block.empty()) throw Error(Errc::Internal, "structure contains an empty block");
    for (const auto& factor : block) {
      if (factor.empty()) throw Error(Errc::Internal, "structure contains an empty factor");
      for (int v : factor) {
        if (v < 0 || v >= dimension)
          throw Error(Errc::Internal, "structure references an out-of-range variable");
        if (seen[static_cast<std::size_t>(v)]++)
          throw Error(Errc::Internal, "structure repeats a variable across factors");
      }
    }
  }
  for (int c : seen)
    if (c != 1) throw Error(Errc::Internal, "structure does not cover every variable");
}

std::string to_string(Classification c) {
  return c == Classification::CompletelySeparable ? "completely_separable"
                                                  : "partially_separable";
}

std::string SeparableStructure::to_json_string() const {
  nlohmann::json j;
  j["dimension"] = dimension;
  auto& jb = j["blocks"] = nlohmann::json::array();
  for (const auto& block : blocks) {
    nlohmann::json jblock = nlohmann::json::array();
    for (const auto& factor : block) {
      nlohmann::json jf = nlohmann::json::array();
      for (int v : factor) jf.push_back(v + 1);  // 1-based externally
      jblock.push_back(std::move(jf));
    }
    jb.push_back(std::move(jblock));
  }
  j["classification"] = to_string(classification());
  j["epsilon"] = epsilon;
  j["seed"] = seed;
  if (degenerate_constant) j["degenerate_constant"] = true;
  return j.dump();
}

SeparableStructure SeparableStructure::from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidInput, std::string("structure JSON malformed: ") + e.what());
  }
  SeparableStructure s;
  try {
    s.dimension = j.at("dimension").get<int>();
    for (const auto& jblock : j.at("blocks")) {
      std::vector<std::vector<int>> block;
      for (const auto& jf : jblock) {
        std::vector<int> factor;
        for (const auto& v : jf) factor.push_back(v.get<int>() - 1);
        block.push_back(std::move(factor));
      }
      s.blocks.push_back(std::move(block));
    }
    s.epsilon = j.value("epsilon", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
    s.degenerate_constant = j.value("degenerate_constant", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidInput, std::string("structure JSON malformed: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace bbp
