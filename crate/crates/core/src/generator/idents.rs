use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IdentRole {
    Contract,
    Function,
    Variable,
}

/// Stems for the randomized withdraw-style function. Shared by vulnerable
/// and secure templates so names carry no label signal.
pub const FUNCTION_STEMS: &[&str] = &[
    "withdraw", "claim", "redeem", "cashOut", "payout", "collect", "release", "retrieve", "exit", "refund", "harvest",
    "settle", "unlock", "disburse", "takeOut", "reclaim",
];

const FUNCTION_SUFFIXES: &[&str] = &["", "", "Funds", "All", "Balance", "Ether", "Now"];

const VARIABLE_NAMES: &[&str] = &["amount", "value", "total", "credit", "payment", "share", "quota", "sum"];

/// Names used by the templates for one identifier pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentPool {
    pub index: u32,
    contract_prefixes: &'static [&'static str],
    pub balance_var: &'static str,
    pub reward_var: &'static str,
    pub contribution_var: &'static str,
    pub amount_param: &'static str,
    pub deposit_fn: &'static str,
    pub lock_var: &'static str,
    pub transfer_fn: &'static str,
}

const POOLS: [IdentPool; 8] = [
    IdentPool {
        index: 0,
        contract_prefixes: &[],
        balance_var: "balances",
        reward_var: "rewards",
        contribution_var: "contributions",
        amount_param: "_amount",
        deposit_fn: "deposit",
        lock_var: "locked",
        transfer_fn: "transfer",
    },
    IdentPool {
        index: 1,
        contract_prefixes: &["Vault", "Treasury"],
        balance_var: "balances",
        reward_var: "pendingRewards",
        contribution_var: "pledges",
        amount_param: "amount",
        deposit_fn: "deposit",
        lock_var: "busy",
        transfer_fn: "transferBalance",
    },
    IdentPool {
        index: 2,
        contract_prefixes: &["Bank", "Savings"],
        balance_var: "deposits",
        reward_var: "accrued",
        contribution_var: "contributions",
        amount_param: "value",
        deposit_fn: "fund",
        lock_var: "entered",
        transfer_fn: "move",
    },
    IdentPool {
        index: 3,
        contract_prefixes: &["Escrow", "Custody"],
        balance_var: "credits",
        reward_var: "rewardOf",
        contribution_var: "backers",
        amount_param: "sum",
        deposit_fn: "topUp",
        lock_var: "inCall",
        transfer_fn: "assign",
    },
    IdentPool {
        index: 4,
        contract_prefixes: &["Wallet", "Purse"],
        balance_var: "userBalances",
        reward_var: "earned",
        contribution_var: "stakes",
        amount_param: "qty",
        deposit_fn: "addFunds",
        lock_var: "mutex",
        transfer_fn: "give",
    },
    IdentPool {
        index: 5,
        contract_prefixes: &["Fund", "Reserve"],
        balance_var: "ledger",
        reward_var: "owed",
        contribution_var: "paidIn",
        amount_param: "wad",
        deposit_fn: "save",
        lock_var: "processing",
        transfer_fn: "shift",
    },
    IdentPool {
        index: 6,
        contract_prefixes: &["Pool", "Stake"],
        balance_var: "holdings",
        reward_var: "bonus",
        contribution_var: "escrowed",
        amount_param: "amt",
        deposit_fn: "put",
        lock_var: "guardFlag",
        transfer_fn: "sendTo",
    },
    IdentPool {
        index: 7,
        contract_prefixes: &["Market", "Exchange"],
        balance_var: "accounts",
        reward_var: "yields",
        contribution_var: "tickets",
        amount_param: "payoutAmount",
        deposit_fn: "store",
        lock_var: "reentrancyLock",
        transfer_fn: "reassign",
    },
];

impl IdentPool {
    pub fn get(index: u32) -> &'static IdentPool {
        &POOLS[index as usize % POOLS.len()]
    }

    /// Contract name: a prefix plus a four-digit suffix in `[1000, 9999]`.
    /// Pool 0 uses `reference_prefix`, the name the reference templates use.
    pub fn contract_name(&self, stream: &mut impl RandomStream, reference_prefix: &str) -> String {
        let prefix = if self.contract_prefixes.is_empty() { reference_prefix } else { stream.pick(self.contract_prefixes) };
        format!("{prefix}{}", stream.range_inclusive(1000, 9999))
    }
}

/// Random identifier for `role`. Contract names follow the reference
/// template (`VulnContract` plus four digits).
pub fn gen_identifier(stream: &mut impl RandomStream, role: IdentRole) -> String {
    match role {
        IdentRole::Contract => IdentPool::get(0).contract_name(stream, "VulnContract"),
        IdentRole::Function => function_name(stream),
        IdentRole::Variable => stream.pick(VARIABLE_NAMES).to_string(),
    }
}

pub fn function_name(stream: &mut impl RandomStream) -> String {
    let stem = stream.pick(FUNCTION_STEMS);
    let suffix = stream.pick(FUNCTION_SUFFIXES);
    format!("{stem}{suffix}")
}

/// Contract name for a secondary contract in a unit.
pub fn companion_name(stream: &mut impl RandomStream, names: &[&str]) -> String {
    format!("{}{}", stream.pick(names), stream.range_inclusive(100, 999))
}
