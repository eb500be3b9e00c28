#include "vlo/kitti_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/LU>

#include "vlo/error.hpp"
#include "vlo/png_io.hpp"

namespace vlo {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_number(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": non-numeric token '" + std::string(tok) + "'");
  }
  return v;
}

std::array<double, 12> parse_twelve(std::span<const std::string_view> tokens, std::size_t line_no) {
  if (tokens.size() != 12) {
    fail(ErrorCode::kParse,
         "line " + std::to_string(line_no) + ": expected 12 numbers, found " + std::to_string(tokens.size()));
  }
  std::array<double, 12> v{};
  for (std::size_t i = 0; i < 12; ++i) v[i] = parse_number(tokens[i], line_no);
  return v;
}

Projection to_projection(const std::array<double, 12>& v) {
  Projection p;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) p(r, c) = v[static_cast<std::size_t>(4 * r + c)];
  }
  return p;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

// Rotation drift below this is accepted as is; above it the block is projected onto SO(3).
constexpr double kExactDrift = 1e-9;
constexpr double kFlagDrift = 1e-6;

TransformSE3 to_transform(const Projection& p, bool* flagged) {
  const Eigen::Matrix3d r = p.leftCols<3>();
  const Eigen::Vector3d t = p.col(3);
  const double drift = orthonormality_error(r);
  if (flagged) *flagged = drift > kFlagDrift;
  return drift <= kExactDrift ? TransformSE3(r, t) : TransformSE3::orthonormalized(r, t);
}

void append_row_major(std::ostringstream& os, const Projection& p) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) os << (r || c ? " " : "") << p(r, c);
  }
}

Projection to_projection(const TransformSE3& t) {
  Projection p;
  p.leftCols<3>() = t.rotation();
  p.col(3) = t.translation();
  return p;
}

}  // namespace

Intrinsics KittiCalib::intrinsics(int cam, int width, int height) const {
  const Projection& m = p.at(static_cast<std::size_t>(cam));
  return make_intrinsics(m(0, 0), m(1, 1), m(0, 2), m(1, 2), width, height);
}

ExtrinsicCalib KittiCalib::velo_to_cam(int cam) const {
  const Projection& m = p.at(static_cast<std::size_t>(cam));
  const Eigen::Vector3d offset = m.leftCols<3>().inverse() * m.col(3);
  return {TransformSE3(tr.rotation(), tr.translation() + offset)};
}

KittiCalib parse_calib(std::string_view text) {
  KittiCalib calib;
  std::array<bool, 5> seen{};
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tokens = split_ws(lines[i]);
    if (tokens.empty()) continue;
    const std::string_view key = tokens[0];
    const std::span<const std::string_view> rest(tokens.begin() + 1, tokens.end());
    static constexpr std::array<std::string_view, 4> kP{"P0:", "P1:", "P2:", "P3:"};
    const auto pit = std::find(kP.begin(), kP.end(), key);
    if (pit != kP.end()) {
      const auto idx = static_cast<std::size_t>(pit - kP.begin());
      calib.p[idx] = to_projection(parse_twelve(rest, i + 1));
      seen[idx] = true;
    } else if (key == "Tr:") {
      calib.tr = to_transform(to_projection(parse_twelve(rest, i + 1)), nullptr);
      seen[4] = true;
    }
    // Other keys (e.g. Tr_imu_velo in raw calibration files) are ignored.
  }
  static constexpr std::array<const char*, 5> kNames{"P0", "P1", "P2", "P3", "Tr"};
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) fail(ErrorCode::kParse, std::string("calibration is missing the ") + kNames[i] + ": line");
  }
  return calib;
}

std::string format_calib(const KittiCalib& calib) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < 4; ++i) {
    os << "P" << i << ": ";
    append_row_major(os, calib.p[i]);
    os << "\n";
  }
  os << "Tr: ";
  append_row_major(os, to_projection(calib.tr));
  os << "\n";
  return os.str();
}

KittiCalib read_calib(const std::filesystem::path& path) {
  try {
    return parse_calib(read_text(path));
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

Trajectory parse_poses(std::string_view text, PoseParseReport* report) {
  std::vector<TransformSE3> poses;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tokens = split_ws(lines[i]);
    if (tokens.empty()) continue;
    bool flagged = false;
    poses.push_back(to_transform(to_projection(parse_twelve(tokens, i + 1)), &flagged));
    if (flagged && report) report->reorthonormalized_lines.push_back(i + 1);
  }
  return Trajectory(std::move(poses));
}

std::string format_poses(const Trajectory& traj) {
  std::ostringstream os;
  os.precision(17);
  for (const TransformSE3& t : traj.poses()) {
    append_row_major(os, to_projection(t));
    os << "\n";
  }
  return os.str();
}

Trajectory read_poses(const std::filesystem::path& path, PoseParseReport* report) {
  try {
    return parse_poses(read_text(path), report);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

void write_poses(const std::filesystem::path& path, const Trajectory& traj) { write_text(path, format_poses(traj)); }

std::vector<double> compute_speeds(const Trajectory& traj, double frame_rate) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const TransformSE3 rel = compose(invert(traj[i]), traj[i + 1]);
    out.push_back(rel.translation().norm() * frame_rate * 3.6);
  }
  return out;
}

namespace {

std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir, const std::string& ext) {
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

SequenceIndex load_sequence(const std::filesystem::path& root, const std::string& id, int camera) {
  SequenceIndex seq;
  seq.id = id;
  const auto dir = root / "sequences" / id;
  const auto image_dir = dir / ("image_" + std::to_string(camera));
  if (!std::filesystem::is_directory(image_dir)) fail(ErrorCode::kIo, "missing image directory " + image_dir.string());
  seq.images = list_files(image_dir, ".png");
  if (std::filesystem::is_directory(dir / "velodyne")) seq.scans = list_files(dir / "velodyne", ".bin");
  seq.calib = read_calib(dir / "calib.txt");
  int width = 0, height = 0;
  if (!seq.images.empty()) {
    const Image first = read_image_png(seq.images.front());
    width = first.width();
    height = first.height();
    seq.k = seq.calib.intrinsics(camera, width, height);
  }
  seq.velo_to_cam = seq.calib.velo_to_cam(camera);
  const auto pose_file = root / "poses" / (id + ".txt");
  if (std::filesystem::exists(pose_file)) seq.gt_poses = read_poses(pose_file);

  if (!seq.scans.empty() && seq.scans.size() != seq.images.size()) {
    fail(ErrorCode::kInvalidArgument, "sequence " + id + ": " + std::to_string(seq.images.size()) + " images but " +
                                          std::to_string(seq.scans.size()) + " scans");
  }
  if (seq.gt_poses && seq.gt_poses->size() != seq.images.size()) {
    fail(ErrorCode::kInvalidArgument, "sequence " + id + ": " + std::to_string(seq.images.size()) + " images but " +
                                          std::to_string(seq.gt_poses->size()) + " poses");
  }
  return seq;
}

std::vector<SnippetSample> sample_snippets(const Trajectory& traj, double frame_rate, const SamplerConfig& cfg) {
  if (!(cfg.p_wide >= 0.0 && cfg.p_wide <= 1.0)) fail(ErrorCode::kInvalidArgument, "p_wide must lie in [0, 1]");
  std::vector<SnippetSample> out;
  const int n = static_cast<int>(traj.size());
  if (n < 5) return out;
  auto pair_speed = [&](int a, int b) {
    return compose(invert(traj[static_cast<std::size_t>(a)]), traj[static_cast<std::size_t>(b)]).translation().norm() *
           frame_rate * 3.6;
  };
  std::mt19937_64 rng(cfg.seed);
  for (int c = 2; c <= n - 3; ++c) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    SnippetSample s;
    s.interval = u < cfg.p_wide ? 2 : 1;
    s.prev = c - s.interval;
    s.center = c;
    s.next = c + s.interval;
    s.pair_speeds = {pair_speed(s.prev, c), pair_speed(c, s.next)};
    if (s.min_speed() < cfg.min_speed) continue;
    out.push_back(s);
  }
  return out;
}

std::vector<SnippetSample> sample_snippets(const SequenceIndex& seq, const SamplerConfig& cfg) {
  if (!seq.gt_poses) fail(ErrorCode::kInvalidArgument, "sequence " + seq.id + " has no pose file to derive speeds");
  return sample_snippets(*seq.gt_poses, seq.frame_rate, cfg);
}

SpeedHistogram speed_histogram(const std::vector<SnippetSample>& samples) {
  SpeedHistogram h;
  for (const SnippetSample& s : samples) {
    const double v = s.mean_speed();
    const auto bin = static_cast<long>(std::floor(v / SpeedHistogram::kBinWidth));
    if (bin >= SpeedHistogram::kBins) {
      ++h.overflow;
    } else {
      ++h.counts[static_cast<std::size_t>(std::max(bin, 0L))];
    }
  }
  return h;
}

std::string format_histogram(const SpeedHistogram& h) {
  std::ostringstream os;
  os << "# bin_lo bin_hi count\n";
  for (int i = 0; i < SpeedHistogram::kBins; ++i) {
    os << i * SpeedHistogram::kBinWidth << " " << (i + 1) * SpeedHistogram::kBinWidth << " "
       << h.counts[static_cast<std::size_t>(i)] << "\n";
  }
  os << SpeedHistogram::kBins * SpeedHistogram::kBinWidth << " inf " << h.overflow << "\n";
  return os.str();
}

}  // namespace vlo
