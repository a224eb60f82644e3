#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace regalloc {

enum class Opcode { Mov, Add, Sub, Mul, Div, Cmp, Br, Jmp, Load, Store, Print, Ret, Call };

inline constexpr std::array<Opcode, 13> kAllOpcodes = {
    Opcode::Mov, Opcode::Add,  Opcode::Sub,   Opcode::Mul,   Opcode::Div, Opcode::Cmp,  Opcode::Br,
    Opcode::Jmp, Opcode::Load, Opcode::Store, Opcode::Print, Opcode::Ret, Opcode::Call,
};

std::string_view opcode_name(Opcode op);

/// Maps a mnemonic spelling to its opcode group. Width and addressing
/// suffixes are stripped, so "mov", "mov32", "MOV64ri" all give Mov.
std::optional<Opcode> opcode_group(std::string_view spelling);

/// Upper-case group token used as an embedding entity, e.g. "MOV".
std::string opcode_token(Opcode op);

bool is_terminator(Opcode op);

}  // namespace regalloc
