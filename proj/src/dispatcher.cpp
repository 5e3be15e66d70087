#include "ddcnn/dispatcher.hpp"

#include <fstream>
#include <json.hpp>

#include "ddcnn/error.hpp"

namespace fs = std::filesystem;

namespace ddcnn {
namespace {

[[noreturn]] void no_specialist(DistortionType dtype) {
  throw Error(Errc::NoSpecialist, "no specialist registered for " + std::string(distortion_name(dtype)));
}

void check_tag(DistortionType expected, DistortionType actual, const std::string& source) {
  if (expected != actual) {
    throw Error(Errc::TagMismatch, source + " is tagged " + std::string(distortion_name(actual)) +
                                       ", not " + std::string(distortion_name(expected)));
  }
}

}  // namespace

DenoiserRegistry DenoiserRegistry::load(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(Errc::FileNotFound, "registry not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(Errc::ParseError, path.string() + ": registry must be a JSON object");

  DenoiserRegistry registry;
  registry.base_dir_ = path.parent_path();
  for (const auto& [name, value] : j.items()) {
    const auto dtype = parse_distortion_name(name);
    if (!dtype) throw Error(Errc::ParseError, path.string() + ": unknown distortion type '" + name + "'");
    if (!value.is_string()) throw Error(Errc::ParseError, path.string() + ": path for '" + name + "' must be a string");
    auto e = std::make_unique<Entry>();
    e->checkpoint = value.get<std::string>();
    registry.entries_[*dtype] = std::move(e);
  }
  return registry;
}

void DenoiserRegistry::save(const fs::path& path) const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [dtype, e] : entries_) {
    if (e->checkpoint.empty()) continue;
    j[std::string(distortion_name(dtype))] = e->checkpoint.generic_string();
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write registry " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(Errc::IoError, "failed writing registry " + path.string());
}

void DenoiserRegistry::register_specialist(DistortionType dtype, const fs::path& checkpoint) {
  const fs::path resolved = checkpoint.is_absolute() || base_dir_.empty() ? checkpoint : base_dir_ / checkpoint;
  check_tag(dtype, read_checkpoint_info(resolved).dtype, resolved.string());
  auto e = std::make_unique<Entry>();
  e->checkpoint = checkpoint;
  entries_[dtype] = std::move(e);
}

void DenoiserRegistry::register_model(DistortionType dtype, DenoiserModel model) {
  check_tag(dtype, model.dtype, "model");
  auto e = std::make_unique<Entry>();
  auto shared = std::make_shared<const DenoiserModel>(std::move(model));
  std::call_once(e->once, [&] { e->model = std::move(shared); });
  entries_[dtype] = std::move(e);
}

bool DenoiserRegistry::deregister(DistortionType dtype) { return entries_.erase(dtype) > 0; }

bool DenoiserRegistry::contains(DistortionType dtype) const { return entries_.contains(dtype); }

std::size_t DenoiserRegistry::size() const { return entries_.size(); }

std::vector<DistortionType> DenoiserRegistry::types() const {
  std::vector<DistortionType> out;
  for (const auto& [dtype, e] : entries_) out.push_back(dtype);
  return out;
}

const DenoiserRegistry::Entry& DenoiserRegistry::entry(DistortionType dtype) const {
  const auto it = entries_.find(dtype);
  if (it == entries_.end()) no_specialist(dtype);
  return *it->second;
}

std::shared_ptr<const DenoiserModel> DenoiserRegistry::specialist(DistortionType dtype) const {
  const Entry& e = entry(dtype);
  std::call_once(e.once, [&] {
    const fs::path path = e.checkpoint.is_absolute() || base_dir_.empty() ? e.checkpoint : base_dir_ / e.checkpoint;
    e.loads.fetch_add(1);
    auto model = load_model(path);
    check_tag(dtype, model.dtype, path.string());
    e.model = std::make_shared<const DenoiserModel>(std::move(model));
  });
  return e.model;
}

Image DenoiserRegistry::restore(const Image& img, const DistortionSpec& spec) const {
  const auto model = specialist(spec.dtype);
  check_tag(spec.dtype, model->dtype, "loaded specialist");
  entry(spec.dtype).invocations.fetch_add(1);
  return restore_image(*model, img, LevelMap::from_level(spec.level));
}

Image DenoiserRegistry::restore_chain(const Image& img, const std::vector<DistortionSpec>& specs) const {
  for (const auto& spec : specs) {
    if (!contains(spec.dtype)) no_specialist(spec.dtype);
  }
  Image out = img;
  for (auto it = specs.rbegin(); it != specs.rend(); ++it) out = restore(out, *it);
  return out;
}

std::size_t DenoiserRegistry::load_count(DistortionType dtype) const {
  const auto it = entries_.find(dtype);
  return it == entries_.end() ? 0 : it->second->loads.load();
}

std::size_t DenoiserRegistry::invocation_count(DistortionType dtype) const {
  const auto it = entries_.find(dtype);
  return it == entries_.end() ? 0 : it->second->invocations.load();
}

}  // namespace ddcnn
