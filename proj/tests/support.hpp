#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ragmi/data_model.hpp"

namespace ragmi::test {

/// Fresh scratch directory under $RAGMI_TEST_TMP (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* base = std::getenv("RAGMI_TEST_TMP");
  std::filesystem::path root = base ? base : std::filesystem::temp_directory_path() / "ragmi_tests";
  auto dir = root / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline ChunkDistribution dist(const std::string& query,
                              std::vector<std::pair<std::string, double>> entries) {
  ChunkDistribution d;
  d.query_id = query;
  for (auto& [id, p] : entries) d.entries.push_back({id, p});
  return d;
}

/// Run with one list per query, given as (chunk, score) pairs in any order.
inline RetrieverRun make_run(
    const std::string& name,
    const std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>>& lists) {
  RetrieverRun run{name, {}};
  for (const auto& [q, scored] : lists) run.lists[q] = make_ranked_list(scored);
  return run;
}

inline std::vector<std::string> ids_of(const RankedList& list) {
  std::vector<std::string> out;
  for (const auto& c : list) out.push_back(c.chunk_id);
  return out;
}

}  // namespace ragmi::test
