//! Pre-0.8 contracts in the style of older public datasets: old-style
//! constructors, unnamed fallbacks, `call.value()` chains, `transfer`/`send`,
//! SafeMath and omitted visibility. They stand in for ingested real-world
//! sources and are meant to be run through the modernizer.

use std::fmt::Write;

use super::idents::function_name;
use super::GenError;
use crate::rng::{RandomStream, SplitMix64};
use crate::taxonomy::{Label, Subtype};

const PRAGMAS_04: &[&str] = &["^0.4.24", "^0.4.21", "0.4.25", ">=0.4.22 <0.6.0"];
const PRAGMAS_05: &[&str] = &["^0.5.0", "^0.5.12", "0.5.17"];
const CONTRACT_NAMES: &[&str] = &[
    "EtherBank", "PrivateBank", "EtherStore", "SimpleWallet", "DepositBox", "PiggyBank", "MoneyBox", "CashVault",
    "Crowdfund", "SavingsPot", "Treasury", "PersonalBank", "EthLocker", "Reserve",
];
const BALANCE_VARS: &[&str] = &["balances", "balanceOf", "userBalance", "deposits", "credit", "funds"];
const AMOUNT_PARAMS: &[&str] = &["_amount", "amount", "_value", "_wei"];
const LOCK_MODIFIERS: &[&str] = &["noReentrancy", "nonReentrant", "noReentrant", "mutexed"];
const LOCK_VARS: &[&str] = &["locked", "reentrancyLock", "mutex", "inWithdraw"];
const TRANSFER_FNS: &[&str] = &["transfer", "transferBalance", "sendBalance", "moveFunds"];

const SAFEMATH_LIBRARY: &str = "library SafeMath {
    function mul(uint256 a, uint256 b) internal pure returns (uint256) {
        if (a == 0) {
            return 0;
        }
        uint256 c = a * b;
        assert(c / a == b);
        return c;
    }

    function sub(uint256 a, uint256 b) internal pure returns (uint256) {
        assert(b <= a);
        return a - b;
    }

    function add(uint256 a, uint256 b) internal pure returns (uint256) {
        uint256 c = a + b;
        assert(c >= a);
        return c;
    }
}
";

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dialect {
    V04,
    V05,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SafeMath {
    Off,
    Inline,
    Imported,
}

struct Legacy {
    rng: SplitMix64,
    dialect: Dialect,
    safemath: SafeMath,
    uint: &'static str,
    bal: &'static str,
    hide_visibility: bool,
}

impl Legacy {
    fn vis(&self, v: &str) -> String {
        if self.hide_visibility && v == "public" {
            String::new()
        } else {
            format!(" {v}")
        }
    }

    fn credit(&self, who: &str, amount: &str) -> String {
        let b = self.bal;
        match self.safemath {
            SafeMath::Off => format!("{b}[{who}] += {amount};"),
            _ => format!("{b}[{who}] = {b}[{who}].add({amount});"),
        }
    }

    fn debit(&self, who: &str, amount: &str) -> String {
        let b = self.bal;
        match self.safemath {
            SafeMath::Off => format!("{b}[{who}] -= {amount};"),
            _ => format!("{b}[{who}] = {b}[{who}].sub({amount});"),
        }
    }

    /// Value transfer to `msg.sender` that reverts on failure.
    fn pay(&mut self, amount: &str, allow_transfer: bool) -> String {
        let choices = if allow_transfer { 5 } else { 3 };
        match (self.rng.below(choices), self.dialect) {
            (0, Dialect::V04) => format!("require(msg.sender.call.value({amount})());"),
            (0, Dialect::V05) => format!("(bool ok, ) = msg.sender.call.value({amount})(\"\");\n        require(ok);"),
            (1, Dialect::V04) => format!("if (!msg.sender.call.value({amount})()) {{\n            revert();\n        }}"),
            (1, Dialect::V05) => {
                format!("(bool sent, ) = msg.sender.call.value({amount})(\"\");\n        if (!sent) {{\n            revert();\n        }}")
            }
            (2, Dialect::V04) => format!("msg.sender.call.value({amount})();"),
            (2, Dialect::V05) => format!("msg.sender.call.value({amount})(\"\");"),
            (3, _) => format!("msg.sender.transfer({amount});"),
            _ => format!("require(msg.sender.send({amount}));"),
        }
    }
}

/// A legacy-style source with the given label. Vulnerable sources are
/// single-function or cross-function; secure sources use checks-effects-
/// interactions, an in-body mutex or a lock modifier.
pub fn gen_legacy(seed: u64, label: Label, subtype: Option<Subtype>) -> Result<String, GenError> {
    let subtype = match (label, subtype) {
        (Label::Secure, None) => None,
        (Label::Vulnerable, None) => Some(Subtype::SingleFunction),
        (Label::Vulnerable, Some(s @ (Subtype::SingleFunction | Subtype::CrossFunction))) => Some(s),
        (l, s) => return Err(GenError::InvalidParams(format!("no legacy template for {l} / {s:?}"))),
    };
    let mut rng = SplitMix64::new(seed).fork(0x6c65_6761);
    let dialect = if rng.below(3) == 0 { Dialect::V05 } else { Dialect::V04 };
    let pragma = match dialect {
        Dialect::V04 => *rng.pick(PRAGMAS_04),
        Dialect::V05 => *rng.pick(PRAGMAS_05),
    };
    let safemath = match rng.below(3) {
        0 => SafeMath::Off,
        1 => SafeMath::Inline,
        _ => SafeMath::Imported,
    };
    let uint = if safemath == SafeMath::Off && rng.coin() { "uint" } else { "uint256" };
    let bal = *rng.pick(BALANCE_VARS);
    let hide_visibility = dialect == Dialect::V04 && rng.coin();
    let mut g = Legacy {
        rng,
        dialect,
        safemath,
        uint,
        bal,
        hide_visibility,
    };

    let name = format!("{}{}", g.rng.pick(CONTRACT_NAMES), g.rng.range_inclusive(10, 9999));
    let withdraw = function_name(&mut g.rng);
    let amount = *g.rng.pick(AMOUNT_PARAMS);
    let with_owner = g.rng.coin();
    let with_fallback = g.rng.coin();
    let mut with_getter = g.rng.coin();
    let with_event = g.rng.coin();

    let mut out = format!("pragma solidity {pragma};\n\n");
    match safemath {
        SafeMath::Imported => out.push_str("import \"./SafeMath.sol\";\n\n"),
        SafeMath::Inline => {
            out.push_str(SAFEMATH_LIBRARY);
            out.push('\n');
        }
        SafeMath::Off => {}
    }
    writeln!(out, "contract {name} {{").unwrap();
    if safemath != SafeMath::Off {
        out.push_str("    using SafeMath for uint256;\n\n");
    }
    let map_vis = if g.rng.coin() { " public" } else { "" };
    writeln!(out, "    mapping (address => {uint}){map_vis} {bal};").unwrap();
    if with_owner {
        out.push_str("    address public owner;\n");
    }
    if with_event {
        writeln!(out, "    event Deposit(address indexed from, {uint} value);").unwrap();
    }

    let mut functions: Vec<String> = Vec::new();
    if with_owner {
        functions.push(match dialect {
            Dialect::V04 => format!("    function {name}(){} {{\n        owner = msg.sender;\n    }}\n", g.vis("public")),
            Dialect::V05 => "    constructor() public {\n        owner = msg.sender;\n    }\n".to_string(),
        });
    }
    let dep_vis = match dialect {
        Dialect::V04 => g.vis("public"),
        Dialect::V05 => " public".to_string(),
    };
    let mut deposit = format!("    function deposit(){dep_vis} payable {{\n        {}\n", g.credit("msg.sender", "msg.value"));
    if with_event {
        deposit.push_str("        emit Deposit(msg.sender, msg.value);\n");
    }
    deposit.push_str("    }\n");
    functions.push(deposit);

    let mut state = String::new();
    match (label, subtype) {
        (Label::Vulnerable, Some(Subtype::SingleFunction)) => {
            let pay = g.pay(amount, true);
            let debit = g.debit("msg.sender", amount);
            functions.push(format!(
                "    function {withdraw}({uint} {amount}){} {{\n        require({bal}[msg.sender] >= {amount});\n        {pay}\n        {debit}\n    }}\n",
                g.vis("public")
            ));
        }
        (Label::Vulnerable, _) => {
            let modifier = *g.rng.pick(LOCK_MODIFIERS);
            let lock = *g.rng.pick(LOCK_VARS);
            let mover = *g.rng.pick(TRANSFER_FNS);
            writeln!(state, "    bool {lock};").unwrap();
            functions.push(format!(
                "    modifier {modifier}() {{\n        require(!{lock});\n        {lock} = true;\n        _;\n        {lock} = false;\n    }}\n"
            ));
            let pay = g.pay("owed", false);
            functions.push(format!(
                "    function {withdraw}(){} {modifier} {{\n        {uint} owed = {bal}[msg.sender];\n        require(owed > 0);\n        {pay}\n        {bal}[msg.sender] = 0;\n    }}\n",
                g.vis("public")
            ));
            let credit = g.credit("to", amount);
            let debit = g.debit("msg.sender", amount);
            functions.push(format!(
                "    function {mover}(address to, {uint} {amount}){} {{\n        require({bal}[msg.sender] >= {amount});\n        {credit}\n        {debit}\n    }}\n",
                g.vis("public")
            ));
        }
        (Label::Secure, _) => {
            let debit = g.debit("msg.sender", amount);
            let check = format!("require({bal}[msg.sender] >= {amount});");
            let body = match g.rng.below(3) {
                0 => {
                    let pay = g.pay(amount, true);
                    format!("        {check}\n        {debit}\n        {pay}\n")
                }
                1 => {
                    // A view over state written after the call would read
                    // as a read-only exposure.
                    with_getter = false;
                    let lock = *g.rng.pick(LOCK_VARS);
                    writeln!(state, "    bool {lock};").unwrap();
                    let pay = g.pay(amount, true);
                    format!("        require(!{lock});\n        {check}\n        {lock} = true;\n        {pay}\n        {debit}\n        {lock} = false;\n")
                }
                _ => {
                    with_getter = false;
                    let modifier = *g.rng.pick(LOCK_MODIFIERS);
                    let lock = *g.rng.pick(LOCK_VARS);
                    writeln!(state, "    bool {lock};").unwrap();
                    functions.push(format!(
                        "    modifier {modifier}() {{\n        require(!{lock});\n        {lock} = true;\n        _;\n        {lock} = false;\n    }}\n"
                    ));
                    let pay = g.pay(amount, true);
                    return Ok(finish(
                        out,
                        state,
                        functions,
                        format!(
                            "    function {withdraw}({uint} {amount}){} {modifier} {{\n        {check}\n        {pay}\n        {debit}\n    }}\n",
                            g.vis("public")
                        ),
                        &mut g,
                        with_getter,
                        with_fallback,
                    ));
                }
            };
            functions.push(format!("    function {withdraw}({uint} {amount}){} {{\n{body}    }}\n", g.vis("public")));
        }
    }
    Ok(finish(out, state, functions, String::new(), &mut g, with_getter, with_fallback))
}

fn finish(
    mut out: String,
    state: String,
    mut functions: Vec<String>,
    last: String,
    g: &mut Legacy,
    with_getter: bool,
    with_fallback: bool,
) -> String {
    if !last.is_empty() {
        functions.push(last);
    }
    if with_getter {
        let (bal, uint) = (g.bal, g.uint);
        let mutability = match g.dialect {
            Dialect::V04 => "constant",
            Dialect::V05 => "view",
        };
        functions.push(format!(
            "    function getBalance(){} {mutability} returns ({uint}) {{\n        return {bal}[msg.sender];\n    }}\n",
            g.vis("public")
        ));
    }
    if with_fallback {
        functions.push(match g.dialect {
            Dialect::V04 => format!("    function (){} payable {{}}\n", g.vis("public")),
            Dialect::V05 => "    function () external payable {}\n".to_string(),
        });
    }
    out.push_str(&state);
    out.push('\n');
    out.push_str(&functions.join("\n"));
    out.push_str("}\n");
    out
}
