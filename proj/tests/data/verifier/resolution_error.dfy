method m() { x := 1; }
