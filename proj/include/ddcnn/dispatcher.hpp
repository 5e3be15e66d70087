#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "ddcnn/degrade.hpp"
#include "ddcnn/model.hpp"

namespace ddcnn {

/// Specialist denoisers keyed by distortion type. Checkpoints load on first
/// use, exactly once per entry even under concurrent restores.
class DenoiserRegistry {
 public:
  DenoiserRegistry() = default;
  DenoiserRegistry(const DenoiserRegistry&) = delete;
  DenoiserRegistry& operator=(const DenoiserRegistry&) = delete;
  DenoiserRegistry(DenoiserRegistry&&) = default;
  DenoiserRegistry& operator=(DenoiserRegistry&&) = default;

  /// Reads registry.json ({"<dtype name>": "<checkpoint path>"}). Relative
  /// paths resolve against the file's directory. No checkpoint is opened.
  static DenoiserRegistry load(const std::filesystem::path& path);
  /// Writes the mapping; paths are written as registered.
  void save(const std::filesystem::path& path) const;

  /// Checks the checkpoint header's type tag and replaces any previous entry.
  void register_specialist(DistortionType dtype, const std::filesystem::path& checkpoint);
  /// Installs an in-memory model (its tag must equal dtype).
  void register_model(DistortionType dtype, DenoiserModel model);
  bool deregister(DistortionType dtype);

  bool contains(DistortionType dtype) const;
  std::size_t size() const;
  std::vector<DistortionType> types() const;

  /// The specialist for dtype, loading it on first use. Throws NoSpecialist.
  std::shared_ptr<const DenoiserModel> specialist(DistortionType dtype) const;

  /// Routes img to the specialist for spec.dtype at level_norm(spec.level).
  Image restore(const Image& img, const DistortionSpec& spec) const;

  /// Undoes a declared corruption sequence, last corruption first.
  Image restore_chain(const Image& img, const std::vector<DistortionSpec>& specs) const;

  /// Checkpoint reads performed for dtype so far.
  std::size_t load_count(DistortionType dtype) const;
  /// restore() calls routed to dtype so far.
  std::size_t invocation_count(DistortionType dtype) const;

 private:
  struct Entry {
    std::filesystem::path checkpoint;
    mutable std::once_flag once;
    mutable std::shared_ptr<const DenoiserModel> model;
    mutable std::atomic<std::size_t> loads{0};
    mutable std::atomic<std::size_t> invocations{0};
  };

  const Entry& entry(DistortionType dtype) const;

  std::filesystem::path base_dir_;
  std::map<DistortionType, std::unique_ptr<Entry>> entries_;
};

}  // namespace ddcnn
