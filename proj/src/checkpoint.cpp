#include "mmlf/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "mmlf/errors.hpp"
#include "mmlf/kitti_io.hpp"

namespace mmlf {

namespace {

std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void append_block(std::string& out, const std::string& name,
                  std::size_t rows, std::size_t cols,
                  const std::vector<double>& data) {
  out += name + ' ' + std::to_string(rows) + ' ' + std::to_string(cols) +
         '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c > 0) out += ' ';
      out += fmt_full(data[r * cols + c]);
    }
    out += '\n';
  }
}

struct BlockSpec {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  std::vector<double>* data;
};

std::vector<BlockSpec> block_specs(FusionParams& p) {
  const std::size_t H = p.num_classes;
  return {
      {"head3d.weight", H, H, &p.head3d.affine.weight.data},
      {"head3d.bias", H, 1, &p.head3d.affine.bias},
      {"head2d.weight", H, H, &p.head2d.affine.weight.data},
      {"head2d.bias", H, 1, &p.head2d.affine.bias},
      {"score.l1.weight", 18, 5, &p.net.l1.weight.data},
      {"score.l1.bias", 18, 1, &p.net.l1.bias},
      {"score.l2.weight", 36, 18, &p.net.l2.weight.data},
      {"score.l2.bias", 36, 1, &p.net.l2.bias},
      {"score.l3.weight", 1, 36, &p.net.l3.weight.data},
      {"score.l3.bias", 1, 1, &p.net.l3.bias},
  };
}

}  // namespace

std::string format_checkpoint(const FusionParams& params) {
  std::string out =
      "mmlf-ckpt v1 H=" + std::to_string(params.num_classes) + '\n';
  FusionParams copy = params;
  for (const BlockSpec& b : block_specs(copy)) {
    append_block(out, b.name, b.rows, b.cols, *b.data);
  }
  return out;
}

FusionParams parse_checkpoint(const std::string& text) {
  std::istringstream iss(text);
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(iss, line)) {
    throw ParseError(1, "empty checkpoint");
  }
  ++line_no;
  std::size_t H = 0;
  {
    std::istringstream hs(line);
    std::string magic, version, hfield;
    hs >> magic >> version >> hfield;
    if (magic != "mmlf-ckpt" || version != "v1" ||
        hfield.rfind("H=", 0) != 0) {
      throw ParseError(1, "bad checkpoint header");
    }
    const std::string digits = hfield.substr(2);
    char* end = nullptr;
    const long v = std::strtol(digits.c_str(), &end, 10);
    if (digits.empty() || end != digits.c_str() + digits.size() || v < 2) {
      throw ParseError(1, "bad class count in header");
    }
    H = static_cast<std::size_t>(v);
  }

  FusionParams params;
  params.num_classes = H;
  params.head3d = EvidenceHead(H);
  params.head2d = EvidenceHead(H);

  for (const BlockSpec& spec : block_specs(params)) {
    if (!std::getline(iss, line)) {
      throw ParseError(line_no, "missing block " + spec.name);
    }
    ++line_no;
    std::istringstream bs(line);
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(bs >> name >> rows >> cols)) {
      throw ParseError(line_no, "bad block header: '" + line + "'");
    }
    if (name != spec.name) {
      throw ParseError(line_no,
                       "expected block " + spec.name + ", got " + name);
    }
    if (rows != spec.rows || cols != spec.cols) {
      throw ParseError(line_no, "block " + name + " must be " +
                                    std::to_string(spec.rows) + "x" +
                                    std::to_string(spec.cols));
    }
    spec.data->assign(rows * cols, 0.0);
    std::size_t filled = 0;
    while (filled < rows * cols) {
      if (!std::getline(iss, line)) {
        throw ParseError(line_no, "truncated block " + name);
      }
      ++line_no;
      std::istringstream vs(line);
      std::string tok;
      while (vs >> tok) {
        if (filled >= rows * cols) {
          throw ParseError(line_no, "too many values in block " + name);
        }
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size()) {
          throw ParseError(line_no, "not a number: '" + tok + "'");
        }
        (*spec.data)[filled++] = v;
      }
    }
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path,
                     const FusionParams& params) {
  write_text_file_atomic(path, format_checkpoint(params));
}

FusionParams load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_text_file(path));
}

}  // namespace mmlf
