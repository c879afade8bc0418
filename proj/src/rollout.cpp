#include "rollout.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "error.hpp"
#include "ops.hpp"

namespace gridvit {

std::vector<Tensor64> average_heads(const AttentionStack& stack) {
  if (stack.layers < 1 || stack.heads < 1 ||
      stack.mats.size() !=
          static_cast<std::size_t>(stack.layers) * static_cast<std::size_t>(stack.heads)) {
    fail(ErrorCode::validation, "attention stack layout is inconsistent");
  }
  const int t = stack.tokens;
  std::vector<Tensor64> averaged;
  averaged.reserve(static_cast<std::size_t>(stack.layers));
  for (int l = 0; l < stack.layers; ++l) {
    Tensor64 mean({t, t});
    for (int h = 0; h < stack.heads; ++h) {
      const Tensor& m = stack.at(l, h);
      if (m.dim(0) != t || m.dim(1) != t) {
        fail(ErrorCode::validation, "attention matrix extent mismatch");
      }
      for (std::size_t i = 0; i < mean.size(); ++i)
        mean[i] += static_cast<double>(m[i]);
    }
    const double inv = 1.0 / stack.heads;
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] *= inv;
    averaged.push_back(std::move(mean));
  }
  return averaged;
}

Tensor64 rollout(const std::vector<Tensor64>& averaged) {
  if (averaged.empty()) fail(ErrorCode::validation, "rollout of an empty stack");
  const int t = averaged[0].dim(0);

  auto residual_adjusted = [t](const Tensor64& a) {
    if (a.rank() != 2 || a.dim(0) != t || a.dim(1) != t) {
      fail(ErrorCode::validation, "rollout layers must all be " +
                                      std::to_string(t) + "x" + std::to_string(t));
    }
    Tensor64 out({t, t});
    for (int r = 0; r < t; ++r) {
      double row_sum = 0.0;
      for (int c = 0; c < t; ++c) row_sum += a.at(r, c);
      if (std::fabs(row_sum - 1.0) > 1e-4) {
        fail(ErrorCode::validation,
             "attention row " + std::to_string(r) + " sums to " +
                 std::to_string(row_sum) + ", not 1");
      }
      double adjusted_sum = 0.0;
      for (int c = 0; c < t; ++c) {
        const double v = 0.5 * a.at(r, c) + (r == c ? 0.5 : 0.0);
        out.at(r, c) = v;
        adjusted_sum += v;
      }
      const double inv = 1.0 / adjusted_sum;
      for (int c = 0; c < t; ++c) out.at(r, c) *= inv;
    }
    return out;
  };

  Tensor64 result = residual_adjusted(averaged[0]);
  for (std::size_t l = 1; l < averaged.size(); ++l) {
    result = matmul(residual_adjusted(averaged[l]), result);
  }
  return result;
}

RolloutMap class_attention_map(const Tensor64& rollout_matrix,
                               const ModelConfig& config) {
  const int n = config.patch_count();
  if (rollout_matrix.rank() != 2 || rollout_matrix.dim(0) != n + 1 ||
      rollout_matrix.dim(1) != n + 1) {
    fail(ErrorCode::validation,
         "rollout matrix " + rollout_matrix.shape_str() +
             " does not match the config's " + std::to_string(n + 1) + " tokens");
  }
  RolloutMap map;
  map.matrix = rollout_matrix;
  map.class_map = Tensor({n});
  for (int p = 0; p < n; ++p) {
    map.class_map[static_cast<std::size_t>(p)] =
        static_cast<float>(rollout_matrix.at(0, p + 1));
  }

  const int gh = config.grid_h(), gw = config.grid_w(), ps = config.patch_size;
  const int pw = gw / ps;
  map.overlay = Tensor({gh, gw});
  for (int r = 0; r < gh; ++r) {
    for (int c = 0; c < gw; ++c) {
      const int p = (r / ps) * pw + (c / ps);
      map.overlay.at(r, c) = map.class_map[static_cast<std::size_t>(p)];
    }
  }
  return map;
}

void export_heatmap(const RolloutMap& map, const ModelConfig& config,
                    const std::string& prefix) {
  if (!map.overlay.all_finite()) {
    fail(ErrorCode::non_finite, "overlay contains non-finite values");
  }

  // Graymap: per-image min-max scaling, then 8-bit quantization.
  const float lo = map.overlay.min_value();
  const float hi = map.overlay.max_value();
  const float range = hi - lo;
  const std::string pgm_path = prefix + ".pgm";
  std::ofstream pgm(pgm_path, std::ios::binary);
  if (!pgm) fail(ErrorCode::io, "cannot write '" + pgm_path + "'");
  pgm << "P5\n" << map.overlay.dim(1) << " " << map.overlay.dim(0) << "\n255\n";
  for (std::size_t i = 0; i < map.overlay.size(); ++i) {
    const float scaled = range > 0.0f ? (map.overlay[i] - lo) / range : 0.0f;
    pgm.put(static_cast<char>(
        static_cast<unsigned char>(std::lround(255.0 * scaled))));
  }
  if (!pgm) fail(ErrorCode::io, "short write to '" + pgm_path + "'");

  // Raw per-patch values; %.9g round-trips binary32 exactly.
  const std::string csv_path = prefix + ".csv";
  std::ofstream csv(csv_path);
  if (!csv) fail(ErrorCode::io, "cannot write '" + csv_path + "'");
  csv << "patch_row,patch_col,value\n";
  const int pw = config.grid_w() / config.patch_size;
  for (int p = 0; p < config.patch_count(); ++p) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%d,%d,%.9g", p / pw, p % pw,
                  static_cast<double>(map.class_map[static_cast<std::size_t>(p)]));
    csv << buf << "\n";
  }
  if (!csv) fail(ErrorCode::io, "short write to '" + csv_path + "'");
}

Tensor load_heatmap_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "patch_row,patch_col,value") {
    fail(ErrorCode::parse, "'" + path + "' is missing the heatmap CSV header");
  }
  std::vector<float> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int pr, pc;
    char comma1, comma2;
    double v;
    if (!(ss >> pr >> comma1 >> pc >> comma2 >> v) || comma1 != ',' ||
        comma2 != ',') {
      fail(ErrorCode::parse,
           "'" + path + "' line " + std::to_string(line_no) + " is malformed");
    }
    values.push_back(static_cast<float>(v));
  }
  if (values.empty()) fail(ErrorCode::parse, "'" + path + "' holds no patches");
  const int count = static_cast<int>(values.size());
  return Tensor({count}, std::move(values));
}

}  // namespace gridvit
