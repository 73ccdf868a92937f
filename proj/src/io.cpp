#include "jsce/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace jsce {

namespace {

constexpr char kMagic[8] = {'J', 'S', 'C', 'E', 'B', 'I', 'N', '1'};

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
uint32_t get_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void BinaryDump::add(const std::string& name, const MatC& m) {
  Array a;
  a.name = name;
  a.complex = true;
  a.dims = {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())};
  a.data.reserve(2 * m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      a.data.push_back(m(r, c).real());
      a.data.push_back(m(r, c).imag());
    }
  arrays_.push_back(std::move(a));
}

void BinaryDump::add(const std::string& name, const VecC& v) {
  add(name, MatC(v));
}

void BinaryDump::add(const std::string& name, const MatR& m) {
  Array a;
  a.name = name;
  a.complex = false;
  a.dims = {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())};
  a.data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.data.push_back(m(r, c));
  arrays_.push_back(std::move(a));
}

void BinaryDump::write(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  os.write(kMagic, 8);
  put_u32(os, static_cast<uint32_t>(arrays_.size()));
  for (const auto& a : arrays_) {
    put_u32(os, static_cast<uint32_t>(a.name.size()));
    os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    put_u32(os, a.complex ? 1 : 0);
    put_u32(os, static_cast<uint32_t>(a.dims.size()));
    for (uint32_t d : a.dims) put_u32(os, d);
    os.write(reinterpret_cast<const char*>(a.data.data()),
             static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
}

std::vector<BinaryDump::Array> BinaryDump::read(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path);
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw ConfigError("bad dump magic in " + path);
  const uint32_t count = get_u32(is);
  std::vector<Array> arrays(count);
  for (auto& a : arrays) {
    const uint32_t name_len = get_u32(is);
    a.name.resize(name_len);
    is.read(a.name.data(), name_len);
    a.complex = get_u32(is) != 0;
    const uint32_t ndim = get_u32(is);
    a.dims.resize(ndim);
    uint64_t n = 1;
    for (auto& d : a.dims) {
      d = get_u32(is);
      n *= d;
    }
    a.data.resize(n * (a.complex ? 2 : 1));
    is.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    if (!is) throw ConfigError("truncated dump: " + path);
  }
  return arrays;
}

void dump_channelset(const std::string& path, const ChannelSet& ch) {
  BinaryDump d;
  d.add("h_CI", ch.h_CI);
  d.add("H_IB", ch.H_IB);
  d.add("h_CB", ch.h_CB);
  d.add("h_IU", ch.h_IU);
  d.add("h_BU", ch.h_BU);
  d.add("h_SU", ch.h_SU);
  d.add("theta_IT", MatR(ch.theta_IT));
  d.add("theta_BT", MatR(ch.theta_BT));
  d.add("theta_IU", MatR(ch.theta_IU));
  d.add("theta_BU", MatR(ch.theta_BU));
  d.add("a_ITS", ch.a_ITS);
  d.add("a_CTS", ch.a_CTS);
  d.add("a_ITB", ch.a_ITB);
  d.add("a_CTB", ch.a_CTB);
  d.add("alpha_IU", ch.alpha_IU);
  d.add("alpha_BU", ch.alpha_BU);
  d.write(path);
}

void dump_observation(const std::string& path, const Observation& obs) {
  BinaryDump d;
  d.add("y_sr", obs.y_sr);
  d.add("y_Br", obs.y_Br);
  d.add("y_c", obs.y_c);
  d.write(path);
}

void dump_model(const std::string& path, const MeasurementModel& m) {
  BinaryDump d;
  d.add("F", m.dense());
  MatR dims(1, 7);
  dims << m.Q, m.P, m.Ns, m.M, m.Np, m.Ts, m.Tc;
  d.add("dims", dims);
  d.write(path);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace jsce
