from .partitions import (
    ClusterElement,
    Partition,
    PartitionSizeError,
    alternating_partition_sum,
    bell_number,
    cumulant_coefficient,
    cumulant_coefficient_for_size,
    cumulant_norm_bound,
    cumulant_norm_ceiling,
    declusterize,
    enumerate_injections,
    enumerate_partitions,
    iter_partitions,
    stirling2,
    subsets,
)
