method Count(a: array<int>, x: int) returns (c: nat
{
  c := 0;
}
