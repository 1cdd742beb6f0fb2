#pragma once

// Helpers shared by the selection and curriculum implementations.

#include <span>
#include <string>
#include <vector>

#include "curate/ingest.hpp"

namespace curate::detail {

inline std::vector<std::string> ids_at(const QualityIndex& index,
                                       std::span<const QualityIndex::Position> pos) {
  std::vector<std::string> ids;
  ids.reserve(pos.size());
  for (auto p : pos) ids.push_back(index.ids()[p]);
  return ids;
}

/// Builds a manifest and records its size as params["m"].
inline SubsetManifest make_manifest(std::vector<std::string> ids,
                                    std::string strategy, Params params,
                                    std::size_t source_count) {
  params["m"] = std::to_string(ids.size());
  return SubsetManifest(std::move(ids), std::move(strategy), std::move(params),
                        source_count);
}

}  // namespace curate::detail
