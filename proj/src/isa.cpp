#include "alpine/isa.hpp"

#include <charconv>
#include <cstdio>
#include <map>

namespace alpine {

namespace {

constexpr std::uint64_t
mask(int bits)
{
    return (std::uint64_t{1} << bits) - 1;
}

std::uint64_t
field(std::uint64_t bits, int shift, int width)
{
    return (bits >> shift) & mask(width);
}

} // namespace

std::string_view
cmOpName(CmOp op)
{
    switch (op) {
    case CmOp::Queue:
        return "CM_QUEUE";
    case CmOp::Dequeue:
        return "CM_DEQUEUE";
    case CmOp::Process:
        return "CM_PROCESS";
    case CmOp::Initialize:
        return "CM_INITIALIZE";
    }
    return "CM_?";
}

std::uint16_t
opcodeOf(CmOp op)
{
    switch (op) {
    case CmOp::Queue:
    case CmOp::Dequeue:
        return kOpcodeQueueDequeue;
    case CmOp::Process:
        return kOpcodeProcess;
    case CmOp::Initialize:
        return kOpcodeInitialize;
    }
    return 0;
}

bool
rwOf(CmOp op)
{
    return op == CmOp::Queue;
}

CmInstruction
CmInstruction::queue(Word32 data, int count, int index, int rd)
{
    return {CmOp::Queue, data, true, static_cast<std::uint32_t>(count),
            static_cast<std::uint32_t>(index), static_cast<std::uint8_t>(rd)};
}

CmInstruction
CmInstruction::dequeue(int count, int index, int rd)
{
    return {CmOp::Dequeue, 0, false, static_cast<std::uint32_t>(count),
            static_cast<std::uint32_t>(index), static_cast<std::uint8_t>(rd)};
}

CmInstruction
CmInstruction::process(int rd)
{
    return {CmOp::Process, 0, false, 0, 0, static_cast<std::uint8_t>(rd)};
}

CmInstruction
CmInstruction::initialize(Word32 data, int count, std::uint32_t address,
                          int rd)
{
    return {CmOp::Initialize, data, false, static_cast<std::uint32_t>(count),
            address, static_cast<std::uint8_t>(rd)};
}

TraceParseError::TraceParseError(std::size_t line, const std::string &what)
    : std::runtime_error("trace line " + std::to_string(line) + ": " + what),
      line_(line)
{
}

bool
isEncodable(const CmInstruction &i)
{
    using namespace encoding;
    return i.rw == rwOf(i.op) && i.rm <= mask(kRmBits) &&
           i.ra <= mask(kRaBits) && i.rn <= mask(kRnBits) &&
           i.rd <= mask(kRdBits);
}

EncodedInstr
encode(const CmInstruction &i)
{
    using namespace encoding;
    if (i.rw != rwOf(i.op))
        throw EncodeError(std::string(cmOpName(i.op)) +
                          " requires rw=" + (rwOf(i.op) ? "1" : "0"));
    if (!isEncodable(i))
        throw EncodeError(std::string(cmOpName(i.op)) +
                          ": operand does not fit its encoding field");
    std::uint64_t bits = 0;
    bits |= std::uint64_t{opcodeOf(i.op)} << kOpcodeShift;
    bits |= std::uint64_t{i.rw ? 1u : 0u} << kRwShift;
    bits |= std::uint64_t{i.rm} << kRmShift;
    bits |= std::uint64_t{i.ra} << kRaShift;
    bits |= std::uint64_t{i.rn} << kRnShift;
    bits |= std::uint64_t{i.rd} << kRdShift;
    return {bits};
}

CmInstruction
decode(EncodedInstr e)
{
    using namespace encoding;
    const auto opcode = field(e.bits, kOpcodeShift, kOpcodeBits);
    const bool rw = field(e.bits, kRwShift, 1) != 0;
    if (field(e.bits, kReservedShift, kReservedBits) != 0)
        throw DecodeError("reserved bits set in CM instruction word");
    CmInstruction i;
    switch (opcode) {
    case kOpcodeQueueDequeue:
        i.op = rw ? CmOp::Queue : CmOp::Dequeue;
        break;
    case kOpcodeProcess:
        i.op = CmOp::Process;
        break;
    case kOpcodeInitialize:
        i.op = CmOp::Initialize;
        break;
    default: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "0x%03llX",
                      static_cast<unsigned long long>(opcode));
        throw DecodeError(std::string("unassigned CM opcode ") + buf);
    }
    }
    if (rw != rwOf(i.op))
        throw DecodeError(std::string(cmOpName(i.op)) + " with rw=" +
                          (rw ? "1" : "0"));
    i.rw = rw;
    i.rm = static_cast<std::uint32_t>(field(e.bits, kRmShift, kRmBits));
    i.ra = static_cast<std::uint32_t>(field(e.bits, kRaShift, kRaBits));
    i.rn = static_cast<std::uint32_t>(field(e.bits, kRnShift, kRnBits));
    i.rd = static_cast<std::uint8_t>(field(e.bits, kRdShift, kRdBits));
    return i;
}

int
TileMap::addTile(AimcTile tile)
{
    tiles_.push_back(std::move(tile));
    return static_cast<int>(tiles_.size()) - 1;
}

void
TileMap::bind(int core, int tile, int slot)
{
    if (core < 0 || tile < 0 || tile >= static_cast<int>(tiles_.size()) ||
        slot < 0 || slot > 255)
        throw std::invalid_argument("invalid tile binding");
    if (static_cast<int>(bindings_.size()) <= core)
        bindings_.resize(core + 1);
    auto &slots = bindings_[core];
    if (static_cast<int>(slots.size()) <= slot)
        slots.resize(slot + 1, -1);
    slots[slot] = tile;
}

TileMap
TileMap::onePerCore(int n_cores, int rows, int cols)
{
    TileMap m;
    for (int c = 0; c < n_cores; ++c)
        m.bind(c, m.addTile(AimcTile(rows, cols)));
    return m;
}

AimcTile *
TileMap::find(int core, int slot)
{
    if (core < 0 || core >= static_cast<int>(bindings_.size()))
        return nullptr;
    const auto &slots = bindings_[core];
    int bound = 0;
    int only = -1;
    for (int t : slots) {
        if (t >= 0) {
            ++bound;
            only = t;
        }
    }
    if (bound == 0)
        return nullptr;
    if (bound == 1)
        return &tiles_[only];
    if (slot < 0 || slot >= static_cast<int>(slots.size()) || slots[slot] < 0)
        return nullptr;
    return &tiles_[slots[slot]];
}

AimcTile &
TileMap::tileFor(int core, int slot)
{
    AimcTile *t = find(core, slot);
    if (!t)
        throw MachineFault("core " + std::to_string(core) +
                           " has no AIMC tile in slot " + std::to_string(slot));
    return *t;
}

bool
TileMap::hasTile(int core) const
{
    if (core < 0 || core >= static_cast<int>(bindings_.size()))
        return false;
    for (int t : bindings_[core])
        if (t >= 0)
            return true;
    return false;
}

ExecResult
execute(const CmInstruction &i, int core, TileMap &tiles, Coupling coupling,
        const LooseBus &bus)
{
    const int slot = static_cast<int>(i.rn >> 24);
    AimcTile &tile = tiles.tileFor(core, slot);
    ExecResult r;
    r.tile = static_cast<int>(&tile - tiles.tiles().data());
    const int index = static_cast<int>(i.rn & 0xFFFFFFu);
    const int count = static_cast<int>(i.ra);
    switch (i.op) {
    case CmOp::Queue:
        r.status = tile.cmQueue(i.rm, count, index);
        r.rd_value = static_cast<std::uint32_t>(r.status);
        r.latency = tile.transferLatency(r.status == kStatusOk ? count : 0,
                                         coupling, bus);
        break;
    case CmOp::Dequeue: {
        const auto d = tile.cmDequeue(count, index);
        r.status = d.status;
        r.rd_value = d.word;
        r.latency = tile.transferLatency(d.valid, coupling, bus);
        break;
    }
    case CmOp::Process:
        r.status = tile.cmProcess();
        r.rd_value = static_cast<std::uint32_t>(r.status);
        r.latency = tile.timing().processTime();
        if (coupling == Coupling::Loose)
            r.latency += bus.penalty_cycles * bus.bus_period;
        break;
    case CmOp::Initialize: {
        const int cols = tile.cols();
        r.status = tile.cmInitialize(index / cols, index % cols, i.rm, count);
        r.rd_value = static_cast<std::uint32_t>(r.status);
        r.latency = tile.transferLatency(r.status == kStatusOk ? count : 0,
                                         coupling, bus);
        break;
    }
    }
    return r;
}

namespace {

std::string_view
trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view>
splitWs(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
            ++i;
        const std::size_t b = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t')
            ++i;
        if (i > b)
            out.push_back(s.substr(b, i - b));
    }
    return out;
}

std::uint64_t
parseUnsigned(std::string_view v, int base, std::size_t line,
              std::string_view key)
{
    if (base == 16) {
        if (v.size() < 3 || v[0] != '0' || (v[1] != 'x' && v[1] != 'X'))
            throw TraceParseError(line, std::string(key) +
                                            " must be hex with 0x prefix");
        v.remove_prefix(2);
    }
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
    if (ec != std::errc() || p != v.data() + v.size())
        throw TraceParseError(line, "bad value for " + std::string(key));
    return out;
}

std::optional<CmOp>
opFromName(std::string_view name)
{
    for (CmOp op : {CmOp::Queue, CmOp::Dequeue, CmOp::Process,
                    CmOp::Initialize})
        if (cmOpName(op) == name)
            return op;
    return std::nullopt;
}

} // namespace

TraceRecord
parseTraceLine(std::string_view line, std::size_t line_no)
{
    const auto tokens = splitWs(trim(line));
    if (tokens.empty())
        throw TraceParseError(line_no, "empty instruction line");
    const auto op = opFromName(tokens[0]);
    if (!op)
        throw TraceParseError(line_no, "unknown instruction '" +
                                           std::string(tokens[0]) + "'");
    std::map<std::string_view, std::string_view> kv;
    for (std::size_t k = 1; k < tokens.size(); ++k) {
        const auto eq = tokens[k].find('=');
        if (eq == std::string_view::npos || eq == 0)
            throw TraceParseError(line_no, "expected key=value, got '" +
                                               std::string(tokens[k]) + "'");
        const auto key = tokens[k].substr(0, eq);
        if (!kv.emplace(key, tokens[k].substr(eq + 1)).second)
            throw TraceParseError(line_no,
                                  "duplicate key '" + std::string(key) + "'");
    }
    auto need = [&](std::string_view key) {
        auto it = kv.find(key);
        if (it == kv.end())
            throw TraceParseError(line_no,
                                  "missing '" + std::string(key) + "'");
        return it->second;
    };
    auto bounded = [&](std::string_view key, int base, std::uint64_t max) {
        const auto v = parseUnsigned(need(key), base, line_no, key);
        if (v > max)
            throw TraceParseError(line_no,
                                  std::string(key) + " out of range");
        return v;
    };
    TraceRecord rec;
    rec.core = static_cast<int>(bounded("core", 10, 0x7FFFFFFF));
    rec.instr.op = *op;
    rec.instr.rw = rwOf(*op);
    rec.instr.rm = static_cast<std::uint32_t>(bounded("rm", 16, 0xFFFFFFFFu));
    rec.instr.ra = static_cast<std::uint32_t>(bounded("ra", 10, 0xFFFFFFFFu));
    rec.instr.rn = static_cast<std::uint32_t>(bounded("rn", 10, 0xFFFFFFFFu));
    rec.instr.rd = static_cast<std::uint8_t>(bounded("rd", 10, 255));
    std::size_t known = 5;
    if (auto it = kv.find("tag"); it != kv.end()) {
        if (it->second.empty())
            throw TraceParseError(line_no, "empty tag");
        rec.tag = std::string(it->second);
        ++known;
    }
    if (kv.size() != known)
        throw TraceParseError(line_no, "unexpected key in instruction line");
    return rec;
}

std::string
formatTraceLine(const TraceRecord &rec)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s core=%d rm=0x%08x ra=%u rn=%u rd=%u",
                  std::string(cmOpName(rec.instr.op)).c_str(), rec.core,
                  rec.instr.rm, rec.instr.ra, rec.instr.rn,
                  static_cast<unsigned>(rec.instr.rd));
    std::string s(buf);
    if (rec.tag)
        s += " tag=" + *rec.tag;
    return s;
}

std::vector<TraceRecord>
parseTrace(std::string_view text)
{
    std::vector<TraceRecord> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(
            pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        ++line_no;
        auto body = raw;
        if (auto hash = body.find('#'); hash != std::string_view::npos)
            body = body.substr(0, hash);
        body = trim(body);
        if (!body.empty())
            out.push_back(parseTraceLine(body, line_no));
        if (nl == std::string_view::npos)
            break;
        pos = nl + 1;
    }
    return out;
}

} // namespace alpine
