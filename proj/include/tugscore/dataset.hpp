#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tugscore/error.hpp"

namespace tugscore {

struct GaitSample {
  std::vector<double> features;
  double tug_s = 0.0;
  std::string subject_id;
  std::string video_id;
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<GaitSample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  std::size_t dimension() const noexcept { return feature_names.size(); }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.features.at(j));
    return out;
  }

  std::vector<double> targets() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.tug_s);
    return out;
  }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
      if (feature_names[j] == name) return j;
    }
    fail(ErrorKind::InvalidInput, "unknown feature " + name);
  }

  void validate(std::size_t min_samples = 1) const {
    require(samples.size() >= min_samples, ErrorKind::InvalidInput,
            "dataset has " + std::to_string(samples.size()) + " samples, need " +
                std::to_string(min_samples));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      require(s.features.size() == feature_names.size(), ErrorKind::InvalidInput,
              "sample " + std::to_string(i) + " has " + std::to_string(s.features.size()) +
                  " features, expected " + std::to_string(feature_names.size()));
      require(std::isfinite(s.tug_s) && s.tug_s > 0.0, ErrorKind::InvalidInput,
              "sample " + std::to_string(i) + " has a non-positive TUG score");
      for (double v : s.features) {
        require(std::isfinite(v), ErrorKind::InvalidInput,
                "sample " + std::to_string(i) + " has a non-finite feature");
      }
    }
  }
};

}  // namespace tugscore
