"""試行ごとのシード導出(splitmix64 ステップ)。"""

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1


def splitmix64(value: int) -> int:
    """splitmix64 の最終化関数"""
    z = value & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """
    マスターシードと試行番号から 64 ビットの子シードを導出する。

    Args:
        master_seed: マスターシード
        index: 試行番号(0 始まり)

    Returns:
        splitmix64(master + (index+1)·γ)
    """
    if index < 0:
        raise ValueError(f"Trial index must be non-negative, got {index}")
    return splitmix64(master_seed + (index + 1) * GOLDEN_GAMMA)


def trial_seeds(master_seed: int, count: int, offset: int = 0) -> list[int]:
    """offset から count 個の子シード"""
    return [derive_seed(master_seed, offset + index) for index in range(count)]
