method One() returns (r: int)
  ensures r == 1
{
  r := 1;
}
