#include "skelfuse/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "skelfuse/error.hpp"
#include "skelfuse/rng.hpp"

namespace skelfuse {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : obj.items()) {
    if (allowed.count(item.key()) == 0) {
      throw DataError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Action parse_action_record(const json& record, const BodyModelDef& model,
                           const std::string& where) {
  if (!record.is_object()) throw DataError(where + ": record is not an object");
  reject_unknown_keys(record, {"id", "class", "fps", "frames"}, where);
  for (const char* key : {"id", "class", "fps", "frames"}) {
    if (!record.contains(key)) {
      throw DataError(where + ": missing key '" + std::string(key) + "'");
    }
  }
  Action action;
  if (!record["id"].is_string()) throw DataError(where + ": 'id' must be a string");
  action.id = record["id"].get<std::string>();
  if (record["class"].is_string()) {
    action.class_label = record["class"].get<std::string>();
  } else if (!record["class"].is_null()) {
    throw DataError(where + ": 'class' must be a string or null");
  }
  if (!record["fps"].is_number()) throw DataError(where + ": 'fps' must be a number");
  action.fps = record["fps"].get<double>();
  const json& frames = record["frames"];
  if (!frames.is_array()) throw DataError(where + ": 'frames' must be an array");
  if (frames.empty()) throw DataError(where + ": empty action '" + action.id + "'");
  action.poses.reserve(frames.size());
  for (const json& frame : frames) {
    if (!frame.is_array()) throw DataError(where + ": frame must be an array");
    Pose pose;
    pose.joints.reserve(frame.size());
    for (const json& joint : frame) {
      if (!joint.is_array() || joint.size() != 3 || !joint[0].is_number() ||
          !joint[1].is_number() || !joint[2].is_number()) {
        throw DataError(where + ": joint must be [x,y,z]");
      }
      pose.joints.push_back(
          {joint[0].get<double>(), joint[1].get<double>(), joint[2].get<double>()});
    }
    action.poses.push_back(std::move(pose));
  }
  try {
    validate_action(action, model.joint_count());
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  }
  return action;
}

ordered_json action_to_json(const Action& action) {
  ordered_json record;
  record["id"] = action.id;
  if (action.class_label) {
    record["class"] = *action.class_label;
  } else {
    record["class"] = nullptr;
  }
  record["fps"] = action.fps;
  ordered_json frames = ordered_json::array();
  for (const Pose& pose : action.poses) {
    ordered_json frame = ordered_json::array();
    for (const Vec3& p : pose.joints) {
      frame.push_back(ordered_json::array({p.x, p.y, p.z}));
    }
    frames.push_back(std::move(frame));
  }
  record["frames"] = std::move(frames);
  return record;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, const BodyModelDef& model) {
  validate_body_model(model);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");

  Dataset dataset;
  dataset.body_model = model;
  std::set<std::string> ids;
  std::set<std::string> classes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed record: " + e.what());
    }
    Action action = parse_action_record(record, model, where);
    if (!ids.insert(action.id).second) {
      throw DataError(where + ": duplicate action id '" + action.id + "'");
    }
    if (action.class_label) classes.insert(*action.class_label);
    dataset.actions.push_back(std::move(action));
  }
  dataset.classes.assign(classes.begin(), classes.end());
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::string out;
  for (const Action& action : dataset.actions) {
    out += action_to_json(action).dump();
    out += '\n';
  }
  atomic_write(path, out);
}

BodyModelDef load_body_model(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": malformed body model: " + e.what());
  }
  const std::string where = path.string();
  if (!doc.is_object()) throw DataError(where + ": body model must be an object");
  reject_unknown_keys(doc,
                      {"joints", "root", "left_hip", "right_hip", "thighbone",
                       "height_chain", "subsets"},
                      where);
  BodyModelDef model;
  try {
    model.joint_names = doc.at("joints").get<std::vector<std::string>>();
    model.root_index = doc.at("root").get<int>();
    model.left_hip_index = doc.at("left_hip").get<int>();
    model.right_hip_index = doc.at("right_hip").get<int>();
    auto bone = doc.at("thighbone").get<std::vector<int>>();
    if (bone.size() != 2) throw DataError(where + ": thighbone must be [hip, knee]");
    model.thighbone = {bone[0], bone[1]};
    model.height_chains = doc.at("height_chain").get<std::vector<std::vector<int>>>();
    for (const auto& item : doc.at("subsets").items()) {
      model.subsets[item.key()] = item.value().get<std::vector<int>>();
    }
  } catch (const json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
  validate_body_model(model);
  return model;
}

void save_body_model(const BodyModelDef& model, const std::filesystem::path& path) {
  ordered_json doc;
  doc["joints"] = model.joint_names;
  doc["root"] = model.root_index;
  doc["left_hip"] = model.left_hip_index;
  doc["right_hip"] = model.right_hip_index;
  doc["thighbone"] = ordered_json::array({model.thighbone.first, model.thighbone.second});
  doc["height_chain"] = model.height_chains;
  ordered_json subsets = ordered_json::object();
  for (const auto& [name, subset] : model.subsets) subsets[name] = subset;
  doc["subsets"] = std::move(subsets);
  atomic_write(path, doc.dump(2) + "\n");
}

FoldSplit load_fold_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fold file '" + path.string() + "'");
  FoldSplit split;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line == "action_id,fold") continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 'id,fold'");
    }
    const std::string id = line.substr(0, comma);
    const std::string fold_text = line.substr(comma + 1);
    if (fold_text != "1" && fold_text != "2") {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": fold must be 1 or 2");
    }
    if (!split.assignment.emplace(id, fold_text == "1" ? 1 : 2).second) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate id '" + id + "'");
    }
  }
  return split;
}

void save_fold_split(const FoldSplit& split, const std::filesystem::path& path) {
  std::string out = "action_id,fold\n";
  for (const auto& [id, fold] : split.assignment) {
    out += id;
    out += ',';
    out += std::to_string(fold);
    out += '\n';
  }
  atomic_write(path, out);
}

std::string file_hash_hex(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::uint64_t h = fnv1a(bytes);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void atomic_write(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename '" + tmp.string() + "' to '" + path.string() + "'");
}

}  // namespace skelfuse
