#include "regalloc/opcode.hpp"

#include <algorithm>
#include <cctype>

namespace regalloc {

std::string_view opcode_name(Opcode op) {
  switch (op) {
    case Opcode::Mov: return "mov";
    case Opcode::Add: return "add";
    case Opcode::Sub: return "sub";
    case Opcode::Mul: return "mul";
    case Opcode::Div: return "div";
    case Opcode::Cmp: return "cmp";
    case Opcode::Br: return "br";
    case Opcode::Jmp: return "jmp";
    case Opcode::Load: return "load";
    case Opcode::Store: return "store";
    case Opcode::Print: return "print";
    case Opcode::Ret: return "ret";
    case Opcode::Call: return "call";
  }
  return "?";
}

std::optional<Opcode> opcode_group(std::string_view spelling) {
  std::string lower(spelling);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

  // Longest root first so "store" is not mistaken for something shorter.
  std::optional<Opcode> best;
  std::size_t best_len = 0;
  for (Opcode op : kAllOpcodes) {
    std::string_view root = opcode_name(op);
    if (lower.size() >= root.size() && lower.compare(0, root.size(), root) == 0 && root.size() > best_len) {
      best = op;
      best_len = root.size();
    }
  }
  if (!best) return std::nullopt;

  // The remainder may only encode widths and r/i/m addressing forms.
  std::string_view rest = std::string_view(lower).substr(best_len);
  bool ok = std::all_of(rest.begin(), rest.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == 'r' || c == 'i' || c == 'm';
  });
  if (!ok) return std::nullopt;
  return best;
}

std::string opcode_token(Opcode op) {
  std::string out(opcode_name(op));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

bool is_terminator(Opcode op) { return op == Opcode::Br || op == Opcode::Jmp || op == Opcode::Ret; }

}  // namespace regalloc
