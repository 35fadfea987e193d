method CopyArray(src: array<int>) returns (dst: array<int>)
  ensures dst.Length == src.Length
  ensures forall k :: 0 <= k < src.Length ==> dst[k] == src[k]
  ensures fresh(dst)
{
  dst := new int[src.Length];
  var i := 0;
  while i < src.Length
    invariant 0 <= i <= src.Length
    invariant forall k :: 0 <= k < i ==> dst[k] == src[k]
    modifies dst
  {
    dst[i] := src[i];
    i := i + 1;
  }
}
