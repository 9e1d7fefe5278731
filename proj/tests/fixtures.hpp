#pragma once

#include "compsearch/dataset.hpp"
#include "compsearch/error.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

inline const std::vector<std::string> kColors = {"beige", "black", "gray", "natural", "red", "white"};
inline const std::vector<std::string> kMaterials = {"cotton", "wool"};
inline const std::vector<std::string> kTypes = {"coat", "dress", "tee"};

/// Every color x material x type combination, without image files.
inline std::vector<compsearch::GalleryRecord> fashion_records() {
  std::vector<compsearch::GalleryRecord> out;
  for (const auto& c : kColors) {
    for (const auto& m : kMaterials) {
      for (const auto& t : kTypes) {
        out.push_back({c + "-" + m + "-" + t, c + " " + m + " " + t, std::nullopt, {c, m, t}});
      }
    }
  }
  return out;
}

inline int error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const compsearch::Error& e) {
    return static_cast<int>(e.code());
  }
  return -1;
}

inline int code(compsearch::Errc e) { return static_cast<int>(e); }

/// Fresh empty directory under the system temp folder.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto p = std::filesystem::temp_directory_path() / ("compsearch-" + tag + "-" + std::to_string(rng()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixtures
