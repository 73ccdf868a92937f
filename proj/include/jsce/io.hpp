#pragma once

#include <string>
#include <vector>

#include "jsce/channel.hpp"
#include "jsce/measurement.hpp"

namespace jsce {

/// Versioned binary container: "JSCEBIN1", then named arrays with a dims
/// header and row-major payloads (complex stored as interleaved re/im f64).
class BinaryDump {
 public:
  void add(const std::string& name, const MatC& m);
  void add(const std::string& name, const VecC& v);
  void add(const std::string& name, const MatR& m);
  void write(const std::string& path) const;

  struct Array {
    std::string name;
    bool complex = false;
    std::vector<uint32_t> dims;
    std::vector<double> data;  // row-major, re/im interleaved when complex
  };
  static std::vector<Array> read(const std::string& path);

 private:
  std::vector<Array> arrays_;
};

void dump_channelset(const std::string& path, const ChannelSet& ch);
void dump_observation(const std::string& path, const Observation& obs);
void dump_model(const std::string& path, const MeasurementModel& m);

/// Deterministic float formatting for CSV output (round-trip exact).
std::string format_double(double v);

}  // namespace jsce
