// CM_* instruction records, their canonical 64-bit encoding, dispatch to the
// tile owned by the issuing core, and the one-line textual trace form.
#pragma once

#include "alpine/tile.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace alpine {

enum class CmOp : std::uint8_t { Queue, Dequeue, Process, Initialize };

inline constexpr std::uint16_t kOpcodeQueueDequeue = 0x108;
inline constexpr std::uint16_t kOpcodeProcess = 0x008;
inline constexpr std::uint16_t kOpcodeInitialize = 0x208;

std::string_view cmOpName(CmOp op); // "CM_QUEUE", ...
std::uint16_t opcodeOf(CmOp op);
bool rwOf(CmOp op);

/// Operand roles:
///   Queue       rm = packed inputs, ra = valid lanes, rn = input index
///   Dequeue     ra = lanes to read, rn = output index
///   Process     all operands ignored except rd
///   Initialize  rm = packed weights, ra = valid lanes, rn = row * cols + col
/// Bits 24..31 of rn select among several tiles bound to one core; they are
/// ignored when the core owns a single tile.
struct CmInstruction {
    CmOp op = CmOp::Process;
    std::uint32_t rm = 0;
    bool rw = false;
    std::uint32_t ra = 0;
    std::uint32_t rn = 0;
    std::uint8_t rd = 0;

    static CmInstruction queue(Word32 data, int count, int index, int rd = 0);
    static CmInstruction dequeue(int count, int index, int rd = 0);
    static CmInstruction process(int rd = 0);
    static CmInstruction initialize(Word32 data, int count,
                                    std::uint32_t address, int rd = 0);

    bool operator==(const CmInstruction &) const = default;
};

class EncodeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class DecodeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class MachineFault : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class TraceParseError : public std::runtime_error {
  public:
    TraceParseError(std::size_t line, const std::string &what);
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

/// 64-bit layout, most significant first:
///   [opcode:12][rw:1][reserved:6][rm:15][ra:10][rn:15][rd:5]
namespace encoding {
inline constexpr int kRdBits = 5;
inline constexpr int kRnBits = 15;
inline constexpr int kRaBits = 10;
inline constexpr int kRmBits = 15;
inline constexpr int kReservedBits = 6;
inline constexpr int kOpcodeBits = 12;
inline constexpr int kRdShift = 0;
inline constexpr int kRnShift = kRdShift + kRdBits;
inline constexpr int kRaShift = kRnShift + kRnBits;
inline constexpr int kRmShift = kRaShift + kRaBits;
inline constexpr int kReservedShift = kRmShift + kRmBits;
inline constexpr int kRwShift = kReservedShift + kReservedBits;
inline constexpr int kOpcodeShift = kRwShift + 1;
} // namespace encoding

struct EncodedInstr {
    std::uint64_t bits = 0;
    bool operator==(const EncodedInstr &) const = default;
};

/// True when the op/rw pairing is legal and every operand fits its field.
bool isEncodable(const CmInstruction &i);
EncodedInstr encode(const CmInstruction &i);
CmInstruction decode(EncodedInstr e);

/// Tiles and the core -> tile binding. One tile per core by default; a core
/// may own several, selected by rn bits 24..31.
class TileMap {
  public:
    TileMap() = default;

    int addTile(AimcTile tile);
    void bind(int core, int tile, int slot = 0);
    /// One fresh rows x cols tile per core.
    static TileMap onePerCore(int n_cores, int rows, int cols);

    AimcTile *find(int core, int slot);
    AimcTile &tileFor(int core, int slot = 0);
    bool hasTile(int core) const;

    std::vector<AimcTile> &tiles() { return tiles_; }
    const std::vector<AimcTile> &tiles() const { return tiles_; }
    /// Per-core bindings; bindings()[core][slot] = tile index or -1.
    const std::vector<std::vector<int>> &bindings() const { return bindings_; }

  private:
    std::vector<AimcTile> tiles_;
    std::vector<std::vector<int>> bindings_;
};

struct ExecResult {
    std::uint32_t rd_value = 0;
    int status = kStatusOk;
    Picoseconds latency{0};
    int tile = -1;
};

/// Dispatches one instruction to the issuing core's tile. The latency includes
/// the coupling-dependent transfer cost for Queue/Dequeue/Initialize.
ExecResult execute(const CmInstruction &i, int core, TileMap &tiles,
                   Coupling coupling = Coupling::Tight,
                   const LooseBus &bus = {});

/// A parsed trace line: the instruction, its issuing core and an optional
/// phase tag carried through as text.
struct TraceRecord {
    CmInstruction instr;
    int core = 0;
    std::optional<std::string> tag;

    bool operator==(const TraceRecord &) const = default;
};

/// `CM_<OP> core=<u> rm=<hex> ra=<u> rn=<u> rd=<u> [tag=<name>]`
TraceRecord parseTraceLine(std::string_view line, std::size_t line_no = 1);
std::string formatTraceLine(const TraceRecord &rec);
/// Parses a whole file body, skipping blank lines and `#` comments.
std::vector<TraceRecord> parseTrace(std::string_view text);

} // namespace alpine
