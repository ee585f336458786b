//! Template text. Outputs are re-rendered by the caller, so layout here only
//! needs to be valid; structure is what matters.

use super::idents::{companion_name, function_name, IdentPool};
use super::{GenParams, Knobs};
use crate::rng::{RandomStream, SplitMix64};
use crate::taxonomy::{GenKind, SecurePattern, Subtype};

const VULN_PRAGMAS: [&str; 3] = ["^0.8.0", "^0.8.19", ">=0.8.0 <0.9.0"];
const SECURE_PRAGMAS: [&str; 3] = ["^0.8.19", "^0.8.0", ">=0.8.0 <0.9.0"];
const GUARD_IMPORT: &str = "@openzeppelin/contracts/security/ReentrancyGuard.sol";
const LOCK_MODIFIERS: &[&str] = &["noReentry", "lockGuard", "singleEntry", "oneAtATime"];
const STATUS_VARS: &[&str] = &["status", "entryState", "callState", "guardState"];
const TOTAL_VARS: &[&str] = &["totalShares", "totalDeposits", "supply", "totalStaked"];
const VIEW_NAMES: &[&str] = &["getPrice", "sharePrice", "exchangeRate", "pricePerShare"];
const CONSUMER_NAMES: &[&str] = &["Lender", "Oracle", "Distributor", "Collateral"];
const CONSUMER_FNS: &[&str] = &["borrow", "draw", "advance", "lend"];
const RECEIVER_INTERFACES: &[&str] = &["IPayoutReceiver", "IRecipient", "ICallbackTarget", "IHook"];

struct Ctx {
    rng: SplitMix64,
    pool: &'static IdentPool,
    knobs: Knobs,
    secure: bool,
}

impl Ctx {
    fn reference_naming(&self) -> bool {
        self.pool.index == 0
    }

    fn pragma(&self) -> &'static str {
        let table = if self.secure { &SECURE_PRAGMAS } else { &VULN_PRAGMAS };
        table[self.knobs.pragma_variant as usize]
    }

    fn payee(&self) -> &'static str {
        if self.pool.index.is_multiple_of(2) {
            "msg.sender"
        } else {
            "payable(msg.sender)"
        }
    }

    fn visibility(&mut self, reference: &'static str) -> &'static str {
        if self.reference_naming() {
            reference
        } else if self.rng.coin() {
            "public"
        } else {
            "external"
        }
    }

    fn cached(&self) -> bool {
        self.knobs.shuffle_variant == 1
    }

    /// Balance check in the style selected by `guard_variant`.
    fn check(&self, ok: &str, alt: &str, fail: &str, msg: &str) -> String {
        match self.knobs.guard_variant {
            0 => format!("require({ok}, \"{msg}\");"),
            1 => format!("require({alt}, \"{msg}\");"),
            _ => format!("if ({fail}) {{ revert(\"{msg}\"); }}"),
        }
    }

    fn positive(&self, x: &str, msg: &str) -> String {
        self.check(&format!("{x} > 0"), &format!("{x} != 0"), &format!("{x} == 0"), msg)
    }

    fn covers(&self, have: &str, need: &str, msg: &str) -> String {
        self.check(&format!("{have} >= {need}"), &format!("{need} <= {have}"), &format!("{have} < {need}"), msg)
    }

    fn deposit_fn(&mut self, ledgers: &[&str], visibility: &str, require_value: bool) -> String {
        let mut body = String::new();
        if require_value {
            body.push_str("require(msg.value > 0, \"Must send ETH\");\n");
        }
        for l in ledgers {
            if l.contains('[') {
                body.push_str(&format!("{l} += msg.value;\n"));
            } else {
                body.push_str(&format!("{l}[msg.sender] += msg.value;\n"));
            }
        }
        format!("function {}() {visibility} payable {{\n{body}}}", self.pool.deposit_fn)
    }

    /// Benign members: (state declarations, function).
    fn extras(&mut self, balance_var: &str, allow_balance_view: bool) -> Vec<(Vec<String>, String)> {
        let mut menu: Vec<u32> = vec![0, 1, 2, 3];
        if allow_balance_view {
            menu.push(4);
        }
        // Fisher-Yates on the menu, then take the first `extra_functions`.
        for i in (1..menu.len()).rev() {
            let j = self.rng.below(i as u64 + 1) as usize;
            menu.swap(i, j);
        }
        menu.truncate(self.knobs.extra_functions as usize);
        menu.sort_unstable();
        menu.into_iter()
            .map(|e| match e {
                0 => (vec!["uint256 public pingCount;".to_string()], "function ping() public {\npingCount += 1;\n}".to_string()),
                1 => {
                    let v = self.rng.range_inclusive(1, 9);
                    (Vec::new(), format!("function version() public pure returns (uint256) {{\nreturn {v};\n}}"))
                }
                2 => (
                    vec!["address public owner = msg.sender;".to_string()],
                    "function setOwner(address next) public {\nrequire(msg.sender == owner, \"Not owner\");\nowner = next;\n}".to_string(),
                ),
                3 => (vec!["bool public paused;".to_string()], "function setPaused(bool flag) public {\npaused = flag;\n}".to_string()),
                _ => (
                    Vec::new(),
                    format!("function balanceOf(address who) public view returns (uint256) {{\nreturn {balance_var}[who];\n}}"),
                ),
            })
            .collect()
    }

    /// Value transfer to the caller for secure templates.
    fn pay(&self, amount: &str) -> String {
        match self.knobs.template_family {
            0 => format!("payable(msg.sender).transfer({amount});"),
            1 => format!("(bool success,) = payable(msg.sender).call{{value: {amount}}}(\"\");\nrequire(success, \"Transfer failed\");"),
            2 => format!("(bool success,) = msg.sender.call{{value: {amount}}}(\"\");\nif (!success) {{ revert(\"Transfer failed\"); }}"),
            _ => format!("(bool sent,) = payable(msg.sender).call{{value: {amount}}}(\"\");\nrequire(sent, \"Payment failed\");"),
        }
    }

    /// Call-out to the caller for vulnerable templates.
    fn call_out(&self, amount: &str) -> String {
        format!("(bool success,) = {}.call{{value: {amount}}}(\"\");\nrequire(success, \"Transfer failed\");", self.payee())
    }
}

#[derive(Default)]
struct ContractText {
    header: String,
    state: Vec<String>,
    modifiers: Vec<String>,
    constructor: Option<String>,
    functions: Vec<String>,
    extras: Vec<String>,
}

impl ContractText {
    fn new(header: String) -> Self {
        Self {
            header,
            ..Self::default()
        }
    }

    fn add_extras(&mut self, extras: Vec<(Vec<String>, String)>) {
        for (state, f) in extras {
            self.state.extend(state);
            self.extras.push(f);
        }
    }

    fn finish(self, shuffled: bool) -> String {
        let mut out = format!("{} {{\n", self.header);
        for s in &self.state {
            out.push_str(s);
            out.push('\n');
        }
        for m in &self.modifiers {
            out.push_str(m);
            out.push('\n');
        }
        if let Some(c) = &self.constructor {
            out.push_str(c);
            out.push('\n');
        }
        let mut functions = self.functions;
        if shuffled {
            functions.reverse();
            for e in self.extras.into_iter().rev() {
                functions.insert(0, e);
            }
        } else {
            functions.extend(self.extras);
        }
        for f in functions {
            out.push_str(&f);
            out.push('\n');
        }
        out.push_str("}\n");
        out
    }
}

fn unit(pragma: &str, imports: &[&str], items: &[String]) -> String {
    let mut out = format!("pragma solidity {pragma};\n");
    for i in imports {
        out.push_str(&format!("import \"{i}\";\n"));
    }
    for item in items {
        out.push('\n');
        out.push_str(item);
    }
    out
}

pub(super) fn build(params: &GenParams) -> String {
    let mut ctx = Ctx {
        rng: SplitMix64::new(params.seed),
        pool: IdentPool::get(params.knobs.ident_pool),
        knobs: params.knobs,
        secure: params.kind.label() == crate::taxonomy::Label::Secure,
    };
    match params.kind {
        GenKind::VulnBasic => vuln_basic(&mut ctx),
        GenKind::VulnAdvanced => match params.subtype.unwrap_or(Subtype::SingleFunction) {
            Subtype::SingleFunction => advanced_single(&mut ctx),
            Subtype::CrossFunction => cross_function(&mut ctx),
            Subtype::CrossContract => cross_contract(&mut ctx),
            Subtype::ReadOnly => read_only(&mut ctx),
        },
        GenKind::SecureBasic => match params.secure_pattern.unwrap_or(SecurePattern::ReentrancyGuard) {
            SecurePattern::Cei => secure_cei(&mut ctx),
            SecurePattern::ReentrancyGuard => secure_guard(&mut ctx),
            SecurePattern::PullPayment => secure_pull(&mut ctx),
            SecurePattern::Mutex => secure_mutex(&mut ctx),
        },
        GenKind::SecureAdvanced => secure_advanced(&mut ctx),
    }
}

/// Withdraw-all, partial-withdraw, reward-claim and refund families.
fn vuln_basic(ctx: &mut Ctx) -> String {
    let name = ctx.pool.contract_name(&mut ctx.rng, "VulnContract");
    let f = function_name(&mut ctx.rng);
    let vis = ctx.visibility("public");
    let guarded_deposit = !ctx.reference_naming() && ctx.rng.coin();
    let amt = ctx.pool.amount_param;
    let mut c = ContractText::new(format!("contract {name}"));

    let (ledger, withdraw) = match ctx.knobs.template_family {
        0 => {
            let b = ctx.pool.balance_var;
            let bal = format!("{b}[msg.sender]");
            let body = if ctx.cached() {
                format!(
                    "uint256 {amt} = {bal};\n{}\n{}\n{bal} = 0;",
                    ctx.positive(amt, "Insufficient balance"),
                    ctx.call_out(amt)
                )
            } else {
                format!("{}\n{}\n{bal} = 0;", ctx.positive(&bal, "Insufficient balance"), ctx.call_out(&bal))
            };
            (b, format!("function {f}() {vis} {{\n{body}\n}}"))
        }
        1 => {
            let b = ctx.pool.balance_var;
            let bal = format!("{b}[msg.sender]");
            let zero = if ctx.cached() { format!("require({amt} > 0, \"Zero amount\");\n") } else { String::new() };
            let body = format!(
                "{zero}{}\n{}\n{bal} -= {amt};",
                ctx.covers(&bal, amt, "Insufficient balance"),
                ctx.call_out(amt)
            );
            (b, format!("function {f}(uint256 {amt}) {vis} {{\n{body}\n}}"))
        }
        2 => {
            let r = ctx.pool.reward_var;
            let body = format!(
                "uint256 reward = {r}[msg.sender];\n{}\n{}\n{r}[msg.sender] = 0;",
                ctx.positive("reward", "No reward"),
                ctx.call_out("reward")
            );
            (r, format!("function {f}() {vis} {{\n{body}\n}}"))
        }
        _ => {
            let k = ctx.pool.contribution_var;
            let paid = format!("{k}[msg.sender]");
            let body = format!(
                "{}\nuint256 {amt} = {paid};\n(bool success,) = {}.call{{value: {amt}}}(\"\");\nrequire(success, \"Refund failed\");\n{paid} = 0;",
                ctx.positive(&paid, "Nothing to refund"),
                ctx.payee()
            );
            (k, format!("function {f}() {vis} {{\n{body}\n}}"))
        }
    };
    c.state.push(format!("mapping(address => uint256) public {ledger};"));
    let deposit = ctx.deposit_fn(&[ledger], vis, guarded_deposit);
    c.functions.push(deposit);
    c.functions.push(withdraw);
    let extras = ctx.extras(ledger, true);
    c.add_extras(extras);
    unit(ctx.pragma(), &[], &[c.finish(ctx.cached())])
}

fn advanced_single(ctx: &mut Ctx) -> String {
    let name = ctx.pool.contract_name(&mut ctx.rng, "VulnContract");
    let f = function_name(&mut ctx.rng);
    let vis = ctx.visibility("public");
    let amt = ctx.pool.amount_param;
    let b = ctx.pool.balance_var;
    let mut items = Vec::new();
    let mut c = ContractText::new(format!("contract {name}"));

    match ctx.knobs.template_family {
        0 => {
            c.state.push("struct Account { uint256 balance; uint256 lastClaim; }".into());
            c.state.push(format!("mapping(address => Account) internal {b};"));
            c.functions.push(format!(
                "function {}() {vis} payable {{\n{b}[msg.sender].balance += msg.value;\n}}",
                ctx.pool.deposit_fn
            ));
            c.functions.push(format!(
                "function {f}() {vis} {{\nAccount storage acct = {b}[msg.sender];\n{}\nuint256 {amt} = acct.balance;\n{}\nacct.balance = 0;\nacct.lastClaim = block.timestamp;\n}}",
                ctx.positive("acct.balance", "Insufficient balance"),
                ctx.call_out(amt)
            ));
        }
        1 => {
            let iface = *ctx.rng.pick(RECEIVER_INTERFACES);
            items.push(format!("interface {iface} {{\nfunction onPayout(uint256 amount) external payable;\n}}\n"));
            c.state.push(format!("mapping(address => uint256) public {b};"));
            let deposit = ctx.deposit_fn(&[b], vis, false);
            c.functions.push(deposit);
            c.functions.push(format!(
                "function {f}() {vis} {{\nuint256 {amt} = {b}[msg.sender];\n{}\n{iface}(msg.sender).onPayout{{value: {amt}}}({amt});\n{b}[msg.sender] = 0;\n}}",
                ctx.positive(amt, "Insufficient balance")
            ));
        }
        2 => {
            c.state.push(format!("mapping(address => uint256) public {b};"));
            let deposit = ctx.deposit_fn(&[b], vis, false);
            c.functions.push(deposit);
            c.functions.push(format!(
                "function {f}() {vis} {{\nuint256 {amt} = {b}[msg.sender];\n{}\nif (address(this).balance >= {amt}) {{\n{}\n}}\n{b}[msg.sender] = 0;\n}}",
                ctx.positive(amt, "Insufficient balance"),
                ctx.call_out(amt)
            ));
        }
        _ => {
            let r = ctx.pool.reward_var;
            c.state.push(format!("mapping(address => uint256) public {b};"));
            c.state.push(format!("mapping(address => uint256) public {r};"));
            let deposit = ctx.deposit_fn(&[b], vis, false);
            c.functions.push(deposit);
            c.functions.push(format!(
                "function {f}() {vis} {{\nuint256 owed = {b}[msg.sender] + {r}[msg.sender];\n{}\n{}\n{b}[msg.sender] = 0;\n{r}[msg.sender] = 0;\n}}",
                ctx.positive("owed", "Nothing owed"),
                ctx.call_out("owed")
            ));
        }
    }
    let extras = ctx.extras(b, ctx.knobs.template_family != 0);
    c.add_extras(extras);
    items.push(c.finish(ctx.cached()));
    unit(ctx.pragma(), &[], &items)
}

/// The paying function holds a lock (or no guard at all); a second entry
/// point moves the same balances without it.
fn cross_function(ctx: &mut Ctx) -> String {
    let name = ctx.pool.contract_name(&mut ctx.rng, "VulnContract");
    let f = function_name(&mut ctx.rng);
    let g = ctx.pool.transfer_fn;
    let amt = ctx.pool.amount_param;
    let b = ctx.pool.balance_var;
    let lock = ctx.pool.lock_var;
    let family = ctx.knobs.template_family;
    let mut imports = Vec::new();
    let header = if family == 0 {
        imports.push(GUARD_IMPORT);
        format!("contract {name} is ReentrancyGuard")
    } else {
        format!("contract {name}")
    };
    let mut c = ContractText::new(header);
    c.state.push(format!("mapping(address => uint256) public {b};"));

    let mut modifiers = String::new();
    let mut prologue = String::new();
    let mut epilogue = String::new();
    match family {
        0 => modifiers.push_str(" nonReentrant"),
        1 => {
            let m = *ctx.rng.pick(LOCK_MODIFIERS);
            c.state.push(format!("bool private {lock};"));
            c.modifiers.push(format!(
                "modifier {m}() {{\nrequire(!{lock}, \"Reentrant call\");\n{lock} = true;\n_;\n{lock} = false;\n}}"
            ));
            modifiers = format!(" {m}");
        }
        2 => {
            c.state.push(format!("bool private {lock};"));
            prologue = format!("require(!{lock}, \"Reentrant call\");\n{lock} = true;\n");
            epilogue = format!("\n{lock} = false;");
        }
        _ => {}
    }
    let check = if family == 3 { String::new() } else { format!("{}\n", ctx.positive(amt, "Insufficient balance")) };
    let deposit = ctx.deposit_fn(&[b], "external", false);
    c.functions.push(deposit);
    c.functions.push(format!(
        "function {f}() external{modifiers} {{\n{prologue}uint256 {amt} = {b}[msg.sender];\n{check}{}\n{b}[msg.sender] = 0;{epilogue}\n}}",
        ctx.call_out(amt)
    ));
    c.functions.push(format!(
        "function {g}(address to, uint256 {amt}) external {{\n{}\n{b}[to] += {amt};\n{b}[msg.sender] -= {amt};\n}}",
        ctx.covers(&format!("{b}[msg.sender]"), amt, "Insufficient balance")
    ));
    let extras = ctx.extras(b, true);
    c.add_extras(extras);
    unit(ctx.pragma(), &imports, &[c.finish(ctx.cached())])
}

/// Victim pays out before syncing a total that a second contract reads.
fn cross_contract(ctx: &mut Ctx) -> String {
    let name = ctx.pool.contract_name(&mut ctx.rng, "VulnContract");
    let f = function_name(&mut ctx.rng);
    let family = ctx.knobs.template_family as usize;
    let consumer = companion_name(&mut ctx.rng, &CONSUMER_NAMES[family..=family]);
    let borrow = CONSUMER_FNS[family];
    let total = TOTAL_VARS[family];
    let amt = ctx.pool.amount_param;
    let s = ctx.pool.balance_var;

    let mut victim = ContractText::new(format!("contract {name}"));
    victim.state.push(format!("mapping(address => uint256) public {s};"));
    victim.state.push(format!("uint256 public {total};"));
    victim.functions.push(format!(
        "function {}() external payable {{\n{s}[msg.sender] += msg.value;\n{total} += msg.value;\n}}",
        ctx.pool.deposit_fn
    ));
    victim.functions.push(format!(
        "function {f}() external {{\nuint256 {amt} = {s}[msg.sender];\n{}\n{s}[msg.sender] = 0;\n{}\n{total} -= {amt};\n}}",
        ctx.positive(amt, "Nothing to withdraw"),
        ctx.call_out(amt)
    ));
    let extras = ctx.extras(s, true);
    victim.add_extras(extras);

    let mut dependent = ContractText::new(format!("contract {consumer}"));
    dependent.state.push(format!("{name} public immutable vault;"));
    dependent.state.push("mapping(address => uint256) public credit;".into());
    dependent.constructor = Some(format!("constructor({name} source) {{\nvault = source;\n}}"));
    dependent.functions.push(format!(
        "function {borrow}(uint256 {amt}) external {{\nuint256 total = vault.{total}();\nrequire(total > 0, \"Empty vault\");\nuint256 limit = vault.{s}(msg.sender) * address(vault).balance / total;\nrequire(credit[msg.sender] + {amt} <= limit, \"Over limit\");\ncredit[msg.sender] += {amt};\n}}"
    ));
    let shuffled = ctx.cached();
    unit(ctx.pragma(), &[], &[victim.finish(shuffled), dependent.finish(false)])
}

/// A view over a total updated after the call-out, priced by a consumer.
fn read_only(ctx: &mut Ctx) -> String {
    let name = ctx.pool.contract_name(&mut ctx.rng, "VulnContract");
    let f = function_name(&mut ctx.rng);
    let family = ctx.knobs.template_family as usize;
    let consumer = companion_name(&mut ctx.rng, &CONSUMER_NAMES[family..=family]);
    let borrow = CONSUMER_FNS[family];
    let total = TOTAL_VARS[family];
    let view = VIEW_NAMES[(family + ctx.pool.index as usize) % VIEW_NAMES.len()];
    let amt = ctx.pool.amount_param;
    let s = ctx.pool.balance_var;

    let mut pool = ContractText::new(format!("contract {name}"));
    pool.state.push(format!("mapping(address => uint256) private {s};"));
    pool.state.push(format!("uint256 private {total};"));
    pool.functions.push(format!(
        "function {}() external payable {{\n{s}[msg.sender] += msg.value;\n{total} += msg.value;\n}}",
        ctx.pool.deposit_fn
    ));
    pool.functions.push(format!(
        "function {f}() external {{\nuint256 {amt} = {s}[msg.sender];\n{}\n{s}[msg.sender] = 0;\n{}\n{total} -= {amt};\n}}",
        ctx.positive(amt, "Nothing staked"),
        ctx.call_out(amt)
    ));
    pool.functions.push(format!(
        "function {view}() external view returns (uint256) {{\nif ({total} == 0) {{\nreturn 1e18;\n}}\nreturn address(this).balance * 1e18 / {total};\n}}"
    ));
    let extras = ctx.extras(s, true);
    pool.add_extras(extras);

    let mut dependent = ContractText::new(format!("contract {consumer}"));
    dependent.state.push(format!("{name} public immutable pool;"));
    dependent.state.push("mapping(address => uint256) public debt;".into());
    dependent.constructor = Some(format!("constructor({name} source) {{\npool = source;\n}}"));
    dependent.functions.push(format!(
        "function {borrow}(uint256 {amt}) external payable {{\nuint256 price = pool.{view}();\nrequire({amt} * 1e18 <= msg.value * price, \"Insufficient collateral\");\ndebt[msg.sender] += {amt};\n}}"
    ));
    let shuffled = ctx.cached();
    unit(ctx.pragma(), &[], &[pool.finish(shuffled), dependent.finish(false)])
}

fn secure_header(ctx: &mut Ctx) -> (String, String, &'static str, bool) {
    let name = ctx.pool.contract_name(&mut ctx.rng, "SecureFund");
    let f = if ctx.reference_naming() { "withdraw".to_string() } else { function_name(&mut ctx.rng) };
    let vis = ctx.visibility("external");
    let guarded_deposit = ctx.reference_naming() || ctx.rng.coin();
    (name, f, vis, guarded_deposit)
}

fn secure_cei(ctx: &mut Ctx) -> String {
    let (name, f, vis, guarded) = secure_header(ctx);
    let amt = ctx.pool.amount_param;
    let b = ctx.pool.balance_var;
    let bal = format!("{b}[msg.sender]");
    let mut c = ContractText::new(format!("contract {name}"));
    c.state.push(format!("mapping(address => uint256) private {b};"));
    let deposit = ctx.deposit_fn(&[b], vis, guarded);
    c.functions.push(deposit);
    let withdraw = if ctx.cached() {
        format!(
            "function {f}() {vis} {{\nuint256 {amt} = {bal};\n{}\n{bal} = 0;\n{}\n}}",
            ctx.positive(amt, "Insufficient balance"),
            ctx.pay(amt)
        )
    } else {
        format!(
            "function {f}(uint256 {amt}) {vis} {{\n{}\n{bal} -= {amt};\n{}\n}}",
            ctx.covers(&bal, amt, "Insufficient balance"),
            ctx.pay(amt)
        )
    };
    c.functions.push(withdraw);
    let extras = ctx.extras(b, true);
    c.add_extras(extras);
    unit(ctx.pragma(), &[], &[c.finish(ctx.cached())])
}

/// The imported-guard shape: effects first and `nonReentrant` on the payout.
fn secure_guard(ctx: &mut Ctx) -> String {
    let (name, f, vis, guarded) = secure_header(ctx);
    let amt = ctx.pool.amount_param;
    let b = ctx.pool.balance_var;
    let bal = format!("{b}[msg.sender]");
    let mut c = ContractText::new(format!("contract {name} is ReentrancyGuard"));
    c.state.push(format!("mapping(address => uint256) private {b};"));
    let deposit = ctx.deposit_fn(&[b], vis, guarded);
    c.functions.push(deposit);
    c.functions.push(format!(
        "function {f}(uint256 {amt}) {vis} nonReentrant {{\n{}\n{bal} -= {amt};\n{}\n}}",
        ctx.covers(&bal, amt, "Insufficient balance"),
        ctx.pay(amt)
    ));
    let extras = ctx.extras(b, true);
    c.add_extras(extras);
    unit(ctx.pragma(), &[GUARD_IMPORT], &[c.finish(ctx.cached())])
}

/// Payers credit a payee; payees withdraw their own credit.
fn secure_pull(ctx: &mut Ctx) -> String {
    let (name, f, vis, _) = secure_header(ctx);
    let b = ctx.pool.balance_var;
    let mut c = ContractText::new(format!("contract {name}"));
    c.state.push(format!("mapping(address => uint256) private {b};"));
    c.functions.push(format!(
        "function {}(address payee) {vis} payable {{\nrequire(msg.value > 0, \"Must send ETH\");\n{b}[payee] += msg.value;\n}}",
        ctx.pool.deposit_fn
    ));
    c.functions.push(format!(
        "function {f}() {vis} {{\nuint256 payment = {b}[msg.sender];\n{}\n{b}[msg.sender] = 0;\n{}\n}}",
        ctx.positive("payment", "No payment due"),
        ctx.pay("payment")
    ));
    let extras = ctx.extras(b, true);
    c.add_extras(extras);
    unit(ctx.pragma(), &[], &[c.finish(ctx.cached())])
}

fn secure_mutex(ctx: &mut Ctx) -> String {
    let (name, f, vis, guarded) = secure_header(ctx);
    let amt = ctx.pool.amount_param;
    let b = ctx.pool.balance_var;
    let lock = ctx.pool.lock_var;
    let bal = format!("{b}[msg.sender]");
    let mut c = ContractText::new(format!("contract {name}"));
    c.state.push(format!("mapping(address => uint256) private {b};"));
    c.state.push(format!("bool private {lock};"));
    let deposit = ctx.deposit_fn(&[b], vis, guarded);
    c.functions.push(deposit);
    c.functions.push(format!(
        "function {f}(uint256 {amt}) {vis} {{\nrequire(!{lock}, \"Reentrant call\");\n{lock} = true;\n{}\n{bal} -= {amt};\n{}\n{lock} = false;\n}}",
        ctx.covers(&bal, amt, "Insufficient balance"),
        ctx.pay(amt)
    ));
    let extras = ctx.extras(b, true);
    c.add_extras(extras);
    unit(ctx.pragma(), &[], &[c.finish(ctx.cached())])
}

/// Call-out textually before the balance update, defended by a custom lock
/// plus the defenses selected by `defense_mix`.
fn secure_advanced(ctx: &mut Ctx) -> String {
    let (name, f, _, guarded) = secure_header(ctx);
    let amt = ctx.pool.amount_param;
    let b = ctx.pool.balance_var;
    let bal = format!("{b}[msg.sender]");
    let mix = ctx.knobs.defense_mix;
    let lock_mod = *ctx.rng.pick(LOCK_MODIFIERS);
    let mut c = ContractText::new(format!("contract {name}"));
    c.state.push(format!("mapping(address => uint256) private {b};"));

    if ctx.knobs.template_family < 2 {
        let lock = ctx.pool.lock_var;
        c.state.push(format!("bool private {lock};"));
        c.modifiers.push(format!(
            "modifier {lock_mod}() {{\nrequire(!{lock}, \"Locked\");\n{lock} = true;\n_;\n{lock} = false;\n}}"
        ));
    } else {
        let status = *ctx.rng.pick(STATUS_VARS);
        c.state.push(format!("uint256 private {status} = 1;"));
        c.modifiers.push(format!(
            "modifier {lock_mod}() {{\nrequire({status} == 1, \"Locked\");\n{status} = 2;\n_;\n{status} = 1;\n}}"
        ));
    }

    let mut mods = format!(" {lock_mod}");
    let mut checks = String::new();
    if mix & 1 != 0 {
        c.state.push("mapping(address => uint256) private lastAction;".into());
        c.state.push("uint256 private constant COOLDOWN = 1 hours;".into());
        checks.push_str("require(block.timestamp >= lastAction[msg.sender] + COOLDOWN, \"Too soon\");\nlastAction[msg.sender] = block.timestamp;\n");
    }
    if mix & 2 != 0 {
        c.state.push("mapping(address => uint256) private lastBlock;".into());
        checks.push_str("require(lastBlock[msg.sender] < block.number, \"Once per block\");\nlastBlock[msg.sender] = block.number;\n");
    }
    if mix & 8 != 0 {
        c.state.push("address private immutable self;".into());
        c.constructor = Some("constructor() {\nself = address(this);\n}".into());
        c.modifiers.push("modifier onlyDirect() {\nrequire(address(this) == self, \"No delegatecall\");\n_;\n}".into());
        mods.push_str(" onlyDirect");
    }
    let gas = if mix & 4 != 0 { ", gas: 2300" } else { "" };

    let deposit = ctx.deposit_fn(&[b], "external", guarded);
    c.functions.push(deposit);
    c.functions.push(format!(
        "function {f}(uint256 {amt}) external{mods} {{\n{}\n{checks}(bool success,) = msg.sender.call{{value: {amt}{gas}}}(\"\");\nrequire(success, \"Transfer failed\");\n{bal} -= {amt};\n}}",
        ctx.covers(&bal, amt, "Insufficient balance")
    ));
    let extras = ctx.extras(b, false);
    c.add_extras(extras);
    unit(ctx.pragma(), &[], &[c.finish(ctx.cached())])
}
