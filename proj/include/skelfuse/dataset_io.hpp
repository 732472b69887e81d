#pragma once

#include <filesystem>
#include <string>

#include "skelfuse/types.hpp"

namespace skelfuse {

// Action interchange file: UTF-8, one JSON object per line,
//   {"id": ..., "class": ... | null, "fps": ..., "frames": [[[x,y,z], ...], ...]}
// Numbers are written with shortest round-trip-exact formatting, so
// save_dataset(load_dataset(f)) reproduces a canonical file byte for byte.
Dataset load_dataset(const std::filesystem::path& path, const BodyModelDef& model);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Body model file: a single JSON document
//   {"joints": [...], "root": i, "left_hip": i, "right_hip": i,
//    "thighbone": [hip, knee], "height_chain": [[...], ...],
//    "subsets": {"name": [...]}}
BodyModelDef load_body_model(const std::filesystem::path& path);
void save_body_model(const BodyModelDef& model, const std::filesystem::path& path);

// Fold assignment as two-column CSV with an "action_id,fold" header.
FoldSplit load_fold_split(const std::filesystem::path& path);
void save_fold_split(const FoldSplit& split, const std::filesystem::path& path);

// FNV-1a over the raw file bytes, as a 16-digit hex string. Used by the
// partial-output cache manifest to detect dataset changes.
std::string file_hash_hex(const std::filesystem::path& path);

// All writers go through a temp-file-then-rename step so readers never see a
// half-written artifact.
void atomic_write(const std::filesystem::path& path, const std::string& contents);

}  // namespace skelfuse
